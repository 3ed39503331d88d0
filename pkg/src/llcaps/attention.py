"""Curved wavelet attention, selective-kernel fusion and the multi-scale residual block.

A CWA block splits its input channels into an identity half and a processing
half. The processing half goes to the Haar domain, through a conv/PReLU/conv
feature selector, then through spatial attention and curve attention in
parallel. The two attention outputs are merged by a 1×1 conv, transformed
back, concatenated with the identity half and mixed by a final 3×3 conv that
is added to the block input.

Curve attention rescales each channel map to [0, 1] and iterates

    IL_n = Curve_{n-1} * IL_{n-1} * (1 - IL_{n-1})

with pixel-wise ``Curve`` maps predicted by conv-conv-sigmoid heads, one head
per order. The output gates the features with the final ``IL``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import tensor as T
from .nn import Conv2d, Module, PReLU
from .tensor import Tensor
from .wavelet import dwt2d, iwt2d

RESCALE_DELTA = 1e-6
CURVE_FORMS = ("multiplicative", "additive")


@dataclass
class CWAConfig:
    channels: int = 8
    split_fraction: float = 0.5
    curve_order: int = 4
    sa_kernel: int = 7
    use_wavelet: bool = True
    use_curve: bool = True
    curve_form: str = "multiplicative"
    zero_init: bool = True

    def __post_init__(self):
        if self.curve_order < 1:
            raise ValueError("curve_order must be >= 1")
        if self.curve_form not in CURVE_FORMS:
            raise ValueError(f"curve_form must be one of {CURVE_FORMS}")
        if self.sa_kernel % 2 == 0:
            raise ValueError("sa_kernel must be odd")
        self.split_sizes()

    def split_sizes(self) -> tuple:
        """(identity, processing) channel counts."""
        processing = int(round(self.channels * self.split_fraction))
        identity = self.channels - processing
        if processing < 1 or identity < 1:
            raise ValueError(
                f"split_fraction {self.split_fraction} leaves an empty part of {self.channels} channels"
            )
        return identity, processing


@dataclass
class CurveState:
    """Iterates of the curve recurrence: ``il[0]`` is the rescaled input, ``il[n]`` is IL_n."""

    il: list = field(default_factory=list)
    curve_params: list = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.curve_params)


def curve_step(il, curve, form: str = "multiplicative"):
    """One application of the curve map. Works on Tensors and plain arrays alike."""
    if form == "multiplicative":
        return curve * il * (1.0 - il)
    if form == "additive":
        return il + curve * il * (1.0 - il)
    raise ValueError(f"unknown curve form {form!r}")


def rescale_unit(f: Tensor, delta: float = RESCALE_DELTA) -> Tensor:
    """Per-channel-map min-max rescale to [0, 1]; a constant map becomes all zeros."""
    lo = T.amin(f, axis=(2, 3), keepdims=True)
    hi = T.amax(f, axis=(2, 3), keepdims=True)
    return (f - lo) / (hi - lo + delta)


class FeatureSelector(Module):
    def __init__(self, channels: int, rng: np.random.Generator):
        self.conv1 = Conv2d(channels, channels, 3, rng)
        self.act = PReLU(channels)
        self.conv2 = Conv2d(channels, channels, 3, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv2(self.act(self.conv1(x)))


class SpatialAttention(Module):
    """Gate every channel with one sigmoid map computed from channel-wise mean and max."""

    def __init__(self, kernel: int, rng: np.random.Generator):
        self.conv = Conv2d(2, 1, kernel, rng)

    def attention_map(self, f: Tensor) -> Tensor:
        pooled = T.concat([T.pool(f, "mean", "channel"), T.pool(f, "max", "channel")], axis=1)
        return T.sigmoid(self.conv(pooled))

    def forward(self, f: Tensor) -> Tensor:
        return f * self.attention_map(f)


class CurveHead(Module):
    """Predicts one order's pixel-wise curve parameters in (0, 1)."""

    def __init__(self, channels: int, rng: np.random.Generator):
        self.conv1 = Conv2d(channels, channels, 3, rng)
        self.conv2 = Conv2d(channels, channels, 3, rng)

    def forward(self, f: Tensor) -> Tensor:
        return T.sigmoid(self.conv2(self.conv1(f)))


class CurveAttention(Module):
    def __init__(self, channels: int, order: int, rng: np.random.Generator,
                 form: str = "multiplicative"):
        if order < 1:
            raise ValueError("curve order must be >= 1")
        self.heads = [CurveHead(channels, rng) for _ in range(order)]
        self.form = form

    @property
    def order(self) -> int:
        return len(self.heads)

    def trace(self, f: Tensor) -> CurveState:
        state = CurveState(il=[rescale_unit(f)])
        for head in self.heads:
            curve = head(f)
            state.curve_params.append(curve)
            state.il.append(curve_step(state.il[-1], curve, self.form))
        return state

    def forward(self, f: Tensor) -> Tensor:
        return f * self.trace(f).il[-1]


def reduced_width(channels: int, ratio: int = 4, floor: int = 4) -> int:
    return max(channels // ratio, floor)


class ChannelAttention(Module):
    """GAP -> 1×1 down -> 1×1 up -> sigmoid gate. Stands in for curve attention in ablations."""

    def __init__(self, channels: int, rng: np.random.Generator):
        d = reduced_width(channels)
        self.down = Conv2d(channels, d, 1, rng)
        self.up = Conv2d(d, channels, 1, rng)

    def forward(self, f: Tensor) -> Tensor:
        return f * T.sigmoid(self.up(self.down(T.pool(f, "mean", "global"))))


class CWABlock(Module):
    def __init__(self, cfg: CWAConfig, rng: np.random.Generator, channels: Optional[int] = None):
        channels = cfg.channels if channels is None else channels
        if channels != cfg.channels:
            cfg = replace(cfg, channels=channels)
        self.identity_channels, self.processing_channels = cfg.split_sizes()
        self.use_wavelet = cfg.use_wavelet
        width = 4 * self.processing_channels if cfg.use_wavelet else self.processing_channels
        self.selector = FeatureSelector(width, rng)
        self.spatial = SpatialAttention(cfg.sa_kernel, rng)
        if cfg.use_curve:
            self.curve = CurveAttention(width, cfg.curve_order, rng, cfg.curve_form)
        else:
            self.curve = ChannelAttention(width, rng)
        self.merge = Conv2d(2 * width, width, 1, rng)
        self.out_conv = Conv2d(channels, channels, 3, rng, zero=cfg.zero_init)

    def forward(self, f_in: Tensor) -> Tensor:
        h, w = f_in.shape[2:]
        if self.use_wavelet and (h % 2 or w % 2):
            raise ValueError(f"CWA block needs even spatial dims, got {h}x{w}")
        f_id, f_p = T.split(f_in, [self.identity_channels, self.processing_channels], axis=1)
        f_w = dwt2d(f_p) if self.use_wavelet else f_p
        f_s = self.selector(f_w)
        dual = self.merge(T.concat([self.spatial(f_s), self.curve(f_s)], axis=1))
        f_p_out = iwt2d(dual) if self.use_wavelet else dual
        return self.out_conv(T.concat([f_id, f_p_out], axis=1)) + f_in


class SKFF(Module):
    """Selective kernel feature fusion: softmax over streams, per channel."""

    def __init__(self, channels: int, rng: np.random.Generator, n_streams: int = 2, ratio: int = 4):
        if n_streams < 2:
            raise ValueError("SKFF needs at least two streams")
        d = reduced_width(channels, ratio)
        self.squeeze = Conv2d(channels, d, 1, rng)
        self.excite = [Conv2d(d, channels, 1, rng) for _ in range(n_streams)]

    def weights(self, streams: list) -> Tensor:
        """Fusion weights, shape N×K×C×1×1, summing to one over K."""
        if len(streams) != len(self.excite):
            raise ValueError(f"expected {len(self.excite)} streams, got {len(streams)}")
        shape = streams[0].shape
        for s in streams[1:]:
            if s.shape != shape:
                raise ValueError(f"stream shapes differ: {shape} vs {s.shape}")
        total = streams[0]
        for s in streams[1:]:
            total = total + s
        z = self.squeeze(T.pool(total, "mean", "global"))
        logits = T.concat([fc(z) for fc in self.excite], axis=1)
        n, c = shape[:2]
        return T.softmax(T.reshape(logits, (n, len(streams), c, 1, 1)), axis=1)

    def forward(self, streams: list) -> Tensor:
        w = self.weights(streams)
        n, c, h, wd = streams[0].shape
        stacked = T.reshape(T.concat(streams, axis=1), (n, len(streams), c, h, wd))
        return T.tsum(w * stacked, axis=1)


class MSRB(Module):
    """Full-resolution and half-resolution CWA streams fused by SKFF, plus a residual."""

    def __init__(self, cfg: CWAConfig, rng: np.random.Generator, channels: Optional[int] = None):
        channels = cfg.channels if channels is None else channels
        self.full = CWABlock(cfg, rng, channels)
        self.half = CWABlock(cfg, rng, channels)
        self.fuse = SKFF(channels, rng)

    def forward(self, f: Tensor) -> Tensor:
        h, w = f.shape[2:]
        if h % 4 or w % 4:
            raise ValueError(f"MSRB needs spatial dims divisible by 4, got {h}x{w}")
        a = self.full(f)
        b = T.resize_bilinear(self.half(T.resize_bilinear(f, 0.5)), 2.0)
        return self.fuse([a, b]) + f
