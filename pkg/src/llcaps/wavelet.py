"""Single-level orthonormal 2D Haar transform, applied channel-wise.

Subbands are stacked on the channel axis in blocks ordered (LL, LH, HL, HH),
so a C-channel H×W input becomes 4C channels at H/2×W/2. For a 2×2 block
``[[a, b], [c, d]]``::

    LL = (a + b + c + d) / 2     LH = (a + b - c - d) / 2
    HL = (a - b + c - d) / 2     HH = (a - b - c + d) / 2

The transform is orthogonal, so each direction's gradient is the other
direction applied to the upstream gradient.
"""

import numpy as np

from .tensor import Tensor, as_tensor, record


def _forward(x: np.ndarray) -> np.ndarray:
    a = x[:, :, 0::2, 0::2]
    b = x[:, :, 0::2, 1::2]
    c = x[:, :, 1::2, 0::2]
    d = x[:, :, 1::2, 1::2]
    ll = (a + b + c + d) * 0.5
    lh = (a + b - c - d) * 0.5
    hl = (a - b + c - d) * 0.5
    hh = (a - b - c + d) * 0.5
    return np.concatenate([ll, lh, hl, hh], axis=1)


def _inverse(p: np.ndarray) -> np.ndarray:
    n, c4, h, w = p.shape
    c = c4 // 4
    ll, lh, hl, hh = (p[:, i * c:(i + 1) * c] for i in range(4))
    out = np.empty((n, c, 2 * h, 2 * w), dtype=p.dtype)
    out[:, :, 0::2, 0::2] = (ll + lh + hl + hh) * 0.5
    out[:, :, 0::2, 1::2] = (ll + lh - hl - hh) * 0.5
    out[:, :, 1::2, 0::2] = (ll - lh + hl - hh) * 0.5
    out[:, :, 1::2, 1::2] = (ll - lh - hl + hh) * 0.5
    return out


def dwt2d(x: Tensor) -> Tensor:
    """Haar analysis: N×C×H×W -> N×4C×H/2×W/2."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ValueError(f"dwt2d expects N×C×H×W, got {x.shape}")
    h, w = x.shape[2:]
    if h % 2 or w % 2:
        raise ValueError(f"dwt2d needs even height and width, got {h}x{w}")
    return record(_forward(x.data), (x,), lambda g: (_inverse(g),), "dwt2d")


def iwt2d(pack: Tensor) -> Tensor:
    """Haar synthesis: N×4C×H×W -> N×C×2H×2W, the exact inverse of :func:`dwt2d`."""
    pack = as_tensor(pack)
    if pack.ndim != 4:
        raise ValueError(f"iwt2d expects N×4C×H×W, got {pack.shape}")
    if pack.shape[1] % 4:
        raise ValueError(f"iwt2d needs a channel count divisible by 4, got {pack.shape[1]}")
    return record(_inverse(pack.data), (pack,), lambda g: (_forward(g),), "iwt2d")


def subbands(pack: Tensor) -> dict:
    """Split a packed transform into its named subbands (plain arrays, no grad)."""
    data = as_tensor(pack).data
    c = data.shape[1] // 4
    return {name: data[:, i * c:(i + 1) * c] for i, name in enumerate(("LL", "LH", "HL", "HH"))}
