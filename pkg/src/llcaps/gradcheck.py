"""Central finite-difference checks for the autodiff engine.

Numerical derivatives only ever call the forward function, so they are an
independent oracle for the tape. Errors are reported as

    max |analytic - numeric| / max(max |numeric|, max |analytic|, floor)

per checked tensor, which stays meaningful when individual entries are ~0.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor


def analytic_grads(fn: Callable[[], Tensor], tensors: Sequence[Tensor]) -> list:
    for t in tensors:
        t.grad = None
    fn().backward()
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]


def numeric_grad(fn: Callable[[], Tensor], t: Tensor, step: float = 1e-4,
                 indices: Optional[Sequence[tuple]] = None) -> np.ndarray:
    """d fn / d t by central differences, at ``indices`` only when given (others left 0)."""
    grad = np.zeros_like(t.data, dtype=np.float64)
    flat_indices = indices if indices is not None else list(np.ndindex(t.shape))
    for idx in flat_indices:
        orig = t.data[idx].copy()
        t.data[idx] = orig + step
        up = float(fn().data.sum())
        t.data[idx] = orig - step
        down = float(fn().data.sum())
        t.data[idx] = orig
        grad[idx] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), float(np.max(np.abs(analytic), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def check_gradients(fn: Callable[[], Tensor], tensors: Sequence[Tensor], step: float = 1e-4,
                    max_entries: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """Worst relative error over ``tensors``; ``max_entries`` samples coordinates per tensor."""
    rng = rng or np.random.default_rng(0)
    grads = analytic_grads(fn, tensors)
    worst = 0.0
    for t, g in zip(tensors, grads):
        indices = None
        if max_entries is not None and t.size > max_entries:
            flat = rng.choice(t.size, size=max_entries, replace=False)
            indices = [np.unravel_index(i, t.shape) for i in flat]
        num = numeric_grad(fn, t, step, indices)
        if indices is not None:
            sel = tuple(np.array(ix) for ix in zip(*indices))
            worst = max(worst, relative_error(g[sel], num[sel]))
        else:
            worst = max(worst, relative_error(g, num))
    return worst


def check_directional(fn: Callable[[], Tensor], tensors: Sequence[Tensor], step: float = 1e-4,
                      n_directions: int = 3, rng: Optional[np.random.Generator] = None) -> float:
    """Compare <grad, v> with (f(x + hv) - f(x - hv)) / 2h for random unit directions v."""
    rng = rng or np.random.default_rng(0)
    grads = analytic_grads(fn, tensors)
    worst = 0.0
    for _ in range(n_directions):
        dirs = [rng.standard_normal(t.shape) for t in tensors]
        norm = np.sqrt(sum(float(np.sum(d * d)) for d in dirs))
        dirs = [d / norm for d in dirs]
        originals = [t.data.copy() for t in tensors]
        for t, d, o in zip(tensors, dirs, originals):
            t.data = (o + step * d).astype(o.dtype)
        up = float(fn().data.sum())
        for t, d, o in zip(tensors, dirs, originals):
            t.data = (o - step * d).astype(o.dtype)
        down = float(fn().data.sum())
        for t, o in zip(tensors, originals):
            t.data = o
        numeric = (up - down) / (2.0 * step)
        analytic = sum(float(np.sum(g * d)) for g, d in zip(grads, dirs))
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst
