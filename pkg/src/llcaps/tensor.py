"""Minimal reverse-mode autodiff over numpy arrays.

Every op records its parents and a backward closure on the output tensor.
``Tensor.backward`` walks that tape once in reverse topological order and
consumes it; leaves accumulate into ``.grad``.

Layout is N, C, H, W throughout. Storage dtype follows the inputs, so a model
cast to float64 is differentiated at float64 (used by the gradient checks).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_DTYPE = np.float32

_grad_enabled = True


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf."""


class TapeConsumedError(RuntimeError):
    """Raised when backward runs over a graph a previous backward already freed."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """An array with an optional gradient and a link back to the op that made it."""

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable] = None
        self._op = ""
        self._consumed = False

    # basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # autodiff ---------------------------------------------------------
    def backward(self) -> None:
        """Backpropagate from this scalar, populating ``.grad`` on leaves.

        The tape is freed afterwards; a second call raises ``TapeConsumedError``.
        """
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise TapeConsumedError("tape already consumed by a previous backward")
        if not self.requires_grad:
            return

        order = _topo_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if node._backward is None:
                if g is not None and node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if g is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            if node._backward is not None:
                node._backward = None
                node._parents = ()
                node._consumed = True

    # operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)


def _topo_order(root: Tensor) -> list:
    """Nodes reachable from ``root``, outputs before inputs."""
    visited = set()
    post = []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            post.append(node)
            continue
        if id(node) in visited:
            continue
        if node._consumed:
            raise TapeConsumedError("graph contains a node freed by an earlier backward")
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    post.reverse()
    return post


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _coerce_pair(a, b):
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


def record(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str = "") -> Tensor:
    """Wrap an op result, attaching the tape entry when any parent needs grad.

    ``backward`` maps the upstream gradient to one gradient (or None) per parent.
    """
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by {op or 'op'}")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise ----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return record(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def backward(g):
        ga = _unbroadcast(g / b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), backward, "div")


def power(x: Tensor, exponent: float) -> Tensor:
    x = as_tensor(x)
    out = x.data ** exponent

    def backward(g):
        return (g * exponent * x.data ** (exponent - 1),)

    return record(out, (x,), backward, "pow")


def sqrt(x: Tensor) -> Tensor:
    x = as_tensor(x)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)

    def backward(g):
        return (g * 0.5 / out,)

    return record(out, (x,), backward, "sqrt")


def exp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return record(out, (x,), backward, "exp")


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, evaluated in a form that cannot overflow."""
    x = as_tensor(x)
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(d.dtype, copy=False)

    def backward(g):
        return (g * out * (1.0 - out),)

    return record(out, (x,), backward, "sigmoid")


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Per-channel parametric ReLU; ``slope`` has one entry per channel (axis 1)."""
    x = as_tensor(x)
    if slope.ndim != 1 or x.ndim < 2 or slope.shape[0] != x.shape[1]:
        raise ValueError(f"prelu slope of shape {slope.shape} does not match {x.shape[1]} channels")
    bshape = (1, -1) + (1,) * (x.ndim - 2)
    a = slope.data.reshape(bshape)
    pos = x.data >= 0
    out = np.where(pos, x.data, a * x.data)

    def backward(g):
        gx = np.where(pos, g, g * a)
        red = (0,) + tuple(range(2, x.ndim))
        ga = np.where(pos, 0.0, g * x.data).sum(axis=red).astype(slope.dtype, copy=False)
        return gx, ga

    return record(out, (x, slope), backward, "prelu")


# reductions -----------------------------------------------------------------

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record(np.asarray(out), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes]))
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape).astype(x.dtype),)

    return record(np.asarray(out, dtype=x.dtype), (x,), backward, "mean")


def _extreme(x: Tensor, axis, keepdims: bool, fn, name: str) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axis(axis, x.ndim)
    kept = fn(x.data, axis=axes, keepdims=True)
    out = kept if keepdims else np.squeeze(kept, axis=axes)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        # ties share the gradient equally
        mask = (x.data == kept).astype(x.dtype)
        mask /= mask.sum(axis=axes, keepdims=True)
        return (mask * g,)

    return record(np.asarray(out), (x,), backward, name)


def amax(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return _extreme(x, axis, keepdims, np.max, "amax")


def amin(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return _extreme(x, axis, keepdims, np.min, "amin")


def softmax(x: Tensor, axis: int) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record(out, (x,), backward, "softmax")


def pool(x: Tensor, kind: str = "mean", scope: str = "global", k: int = 2) -> Tensor:
    """Max or mean pooling.

    ``scope`` is ``"global"`` (N×C×1×1), ``"channel"`` (statistics across
    channels, N×1×H×W) or ``"window"`` (non-overlapping k×k windows).
    """
    if kind not in ("max", "mean"):
        raise ValueError(f"unknown pooling kind {kind!r}")
    x = as_tensor(x)
    if scope == "global":
        axes = (2, 3)
    elif scope == "channel":
        axes = (1,)
    elif scope == "window":
        n, c, h, w = x.shape
        if k < 1 or h % k or w % k:
            raise ValueError(f"window {k} does not divide spatial size {h}x{w}")
        blocks = reshape(x, (n, c, h // k, k, w // k, k))
        return amax(blocks, axis=(3, 5)) if kind == "max" else mean(blocks, axis=(3, 5))
    else:
        raise ValueError(f"unknown pooling scope {scope!r}")
    if kind == "max":
        return amax(x, axis=axes, keepdims=True)
    return mean(x, axis=axes, keepdims=True)


# shape ----------------------------------------------------------------------

def reshape(x: Tensor, shape: tuple) -> Tensor:
    x = as_tensor(x)

    def backward(g):
        return (g.reshape(x.shape),)

    return record(x.data.reshape(shape), (x,), backward, "reshape")


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != axis % len(ref)
        ):
            raise ValueError(f"cannot concat shapes {ref} and {t.shape} on axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return record(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def split(x: Tensor, sizes: Sequence[int], axis: int = 1) -> list:
    x = as_tensor(x)
    if sum(sizes) != x.shape[axis]:
        raise ValueError(f"split sizes {list(sizes)} do not sum to {x.shape[axis]}")
    outs = []
    start = 0
    for size in sizes:
        lo, hi = start, start + size
        index = [slice(None)] * x.ndim
        index[axis] = slice(lo, hi)
        index = tuple(index)

        def backward(g, index=index):
            full = np.zeros_like(x.data)
            full[index] = g
            return (full,)

        outs.append(record(x.data[index].copy(), (x,), backward, "split"))
        start = hi
    return outs


# convolution ----------------------------------------------------------------

def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
           padding: int = 0) -> Tensor:
    """2D cross-correlation, N×Cin×H×W with Cout×Cin×kh×kw -> N×Cout×H'×W'."""
    x = as_tensor(x)
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4D input and weight, got {x.shape} and {weight.shape}")
    n, cin, h, w = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ValueError(f"weight expects {wcin} input channels, input has {cin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {kh}x{kw}")
    if padding < 0 or stride < 1:
        raise ValueError("padding must be >= 0 and stride >= 1")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ValueError("output size is not integral for this stride/padding")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError("kernel larger than padded input")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} does not match {cout} output channels")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # win: N, Cin, Ho, Wo, kh, kw
    out = np.tensordot(win, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out, dtype=x.dtype)

    def backward(g):
        gx = gw = gb = None
        if weight.requires_grad:
            gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3])).astype(weight.dtype, copy=False)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3)).astype(bias.dtype, copy=False)
        if x.requires_grad:
            cols = np.tensordot(g, weight.data, axes=([1], [0]))  # N, Ho, Wo, Cin, kh, kw
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                        cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        if bias is None:
            return gx, gw
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return record(out, parents, backward, "conv2d")


# resampling -----------------------------------------------------------------

def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Row i holds the align_corners=False bilinear weights of output i."""
    scale = n_out / n_in
    m = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        src = max((i + 0.5) / scale - 0.5, 0.0)
        i0 = min(int(np.floor(src)), n_in - 1)
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        m[i, i0] += 1.0 - frac
        m[i, i1] += frac
    return m.astype(dtype)


def resize_bilinear(x: Tensor, scale: float) -> Tensor:
    """Bilinear resize by 0.5 or 2.0 (align_corners=False)."""
    x = as_tensor(x)
    if scale not in (0.5, 2.0):
        raise ValueError(f"scale must be 0.5 or 2.0, got {scale}")
    n, c, h, w = x.shape
    if scale == 0.5 and (h % 2 or w % 2):
        raise ValueError(f"downscale needs even spatial dims, got {h}x{w}")
    ho, wo = int(h * scale), int(w * scale)
    mh = _interp_matrix(h, ho, x.dtype)
    mw = _interp_matrix(w, wo, x.dtype)
    out = mh @ x.data @ mw.T

    def backward(g):
        return (mh.T @ g @ mw,)

    return record(out, (x,), backward, "resize")
