"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"LLCAPS01"                      magic
    u32 version                      currently 1
    u32 n, n bytes                   config text (key=value, utf-8)
    u32 count                        named tensors, then per tensor:
        u16 n, n bytes               name (utf-8)
        u8  dtype                    1 = float32, 2 = float64
        u8  ndim, ndim * u32         shape
        payload                      little-endian, C order

Model parameters are stored under their dotted names; the noise schedule
is stored as ``schedule.beta`` (float64).
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

MAGIC = b"LLCAPS01"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}


class CheckpointError(ValueError):
    pass


def _tensor_table(model) -> list:
    entries = list(model.state_dict().items())
    entries.append(("schedule.beta", model.schedule.beta.astype(np.float64)))
    return entries


def save_checkpoint(model, path) -> None:
    from .config import dump_config

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    text = dump_config(model.config).encode("utf-8")
    buf.write(struct.pack("<I", len(text)))
    buf.write(text)
    entries = _tensor_table(model)
    buf.write(struct.pack("<I", len(entries)))
    for name, arr in entries:
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", code, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("corrupt checkpoint: unexpected end of file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path) -> tuple:
    """Parse a file into (config text, {name: array}) without building a model."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"corrupt checkpoint: bad magic in {path}")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (n,) = r.unpack("<I")
    try:
        text = r.take(n).decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError("corrupt checkpoint: config block is not utf-8") from None
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode("utf-8", errors="replace")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CheckpointError(f"corrupt checkpoint: unknown dtype code {code} for {name}")
        shape = r.unpack(f"<{ndim}I")
        dtype = _DTYPES[code]
        size = int(np.prod(shape)) * dtype.itemsize
        arr = np.frombuffer(r.take(size), dtype=dtype).reshape(shape)
        tensors[name] = arr.astype(dtype.newbyteorder("="))
    if r.pos != len(r.data):
        raise CheckpointError("corrupt checkpoint: trailing bytes")
    return text, tensors


def load_checkpoint(path, model=None):
    """Restore a model; with ``model`` given its config must match the file's tensors."""
    from .config import load_config
    from .network import LLCapsModel

    text, tensors = read_checkpoint(path)
    if model is None:
        model_cfg, _, _ = load_config(text)
        model = LLCapsModel(model_cfg)
    params = dict(model.named_parameters())
    for name, p in params.items():
        if name not in tensors:
            raise CheckpointError(f"parameter {name} missing from checkpoint")
        if tensors[name].shape != p.shape:
            raise CheckpointError(
                f"parameter {name}: checkpoint shape {tensors[name].shape} != model shape {p.shape}"
            )
    extra = [k for k in tensors if k not in params and k != "schedule.beta"]
    if extra:
        raise CheckpointError(f"checkpoint has unexpected parameter {extra[0]}")
    beta = tensors.get("schedule.beta")
    if beta is None or beta.shape != model.schedule.beta.shape or not np.array_equal(beta, model.schedule.beta):
        raise CheckpointError("noise schedule in checkpoint does not match the model config")
    for name, p in params.items():
        p.data = tensors[name].copy()
        p.grad = None
    return model
