"""PPM I/O, synthetic low-light degradation and paired datasets.

Images are float32 arrays shaped 3×H×W with values in [0, 1]. A low-light
input is made from a clean image as ``s * img**gamma``, with ``gamma`` and
``s`` drawn per image from a generator seeded by the dataset seed and the
image name, so content does not depend on iteration order.
"""

from __future__ import annotations

import csv
import os
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("filename", "split", "gamma", "illum", "seed", "target")


class PPMError(ValueError):
    pass


@dataclass
class DegradeConfig:
    gamma_min: float = 2.0
    gamma_max: float = 3.5
    illum_min: float = 0.1
    illum_max: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 1.0 <= self.gamma_min <= self.gamma_max:
            raise ValueError("need 1 <= gamma_min <= gamma_max")
        if not 0.0 < self.illum_min <= self.illum_max <= 1.0:
            raise ValueError("need 0 < illum_min <= illum_max <= 1")


@dataclass
class ImagePair:
    low: np.ndarray
    target: np.ndarray
    gamma: float
    illum: float
    seed: int
    name: str = ""


def degrade(img, gamma: float, illum: float) -> np.ndarray:
    """Gamma correction followed by illumination reduction: ``illum * img**gamma``."""
    if gamma < 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if not 0.0 < illum <= 1.0:
        raise ValueError(f"illumination scale must be in (0, 1], got {illum}")
    arr = np.asarray(getattr(img, "data", img))
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("image values must lie in [0, 1]")
    dtype = arr.dtype if np.issubdtype(arr.dtype, np.floating) else np.float32
    return (illum * arr.astype(np.float64) ** gamma).astype(dtype)


# PPM ------------------------------------------------------------------------

def _header_tokens(data: bytes, count: int) -> tuple:
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PPMError("truncated PPM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PPMError("truncated PPM header")
    return tokens, pos + 1


def decode_ppm(data: bytes) -> np.ndarray:
    if data[:2] != b"P6":
        raise PPMError(f"unsupported image format {data[:2]!r}; only binary P6 PPM is read")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PPMError("malformed PPM header") from None
    if maxval != 255:
        raise PPMError(f"only 8-bit PPM (maxval 255) is supported, got maxval {maxval}")
    if width < 1 or height < 1:
        raise PPMError("PPM has empty dimensions")
    n = width * height * 3
    raster = data[offset:offset + n]
    if len(raster) < n:
        raise PPMError(f"truncated PPM payload: expected {n} bytes, got {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return (pixels.transpose(2, 0, 1).astype(np.float32) / 255.0)


def encode_ppm(img) -> bytes:
    arr = np.asarray(getattr(img, "data", img), dtype=np.float64)
    if arr.ndim == 4 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"expected a 3×H×W image, got {arr.shape}")
    q = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    _, h, w = q.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + q.transpose(1, 2, 0).tobytes()


def load_ppm(path) -> np.ndarray:
    """Read a binary P6 PPM into a float32 3×H×W array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return decode_ppm(data)
    except PPMError as exc:
        raise PPMError(f"{path}: {exc}") from None


def save_ppm(img, path) -> None:
    """Write a 3×H×W image, clamping to [0, 1] and rounding to the nearest 8-bit level."""
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


# datasets -------------------------------------------------------------------

def image_seed(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))]).generate_state(1)[0])


def draw_degradation(cfg: DegradeConfig, name: str) -> tuple:
    """(gamma, illum, item_seed) for one image."""
    item_seed = image_seed(cfg.seed, name)
    rng = np.random.default_rng(item_seed)
    gamma = float(rng.uniform(cfg.gamma_min, cfg.gamma_max))
    illum = float(rng.uniform(cfg.illum_min, cfg.illum_max))
    return gamma, illum, item_seed


def make_pair(target: np.ndarray, cfg: DegradeConfig, name: str) -> ImagePair:
    gamma, illum, item_seed = draw_degradation(cfg, name)
    return ImagePair(degrade(target, gamma, illum), target, gamma, illum, item_seed, name)


def split_names(names: Sequence[str], split: tuple, seed: int) -> tuple:
    """Seeded shuffle, then the first ``split[0]`` percent go to train."""
    train_pct, test_pct = split
    if train_pct < 0 or test_pct < 0 or train_pct + test_pct <= 0:
        raise ValueError(f"invalid split {split}")
    names = sorted(names)
    order = np.random.default_rng(seed).permutation(len(names))
    shuffled = [names[i] for i in order]
    n_train = int(round(len(names) * train_pct / (train_pct + test_pct)))
    return shuffled[:n_train], shuffled[n_train:]


def list_ppms(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p.name for p in directory.iterdir() if p.suffix.lower() == ".ppm")


def make_dataset(directory, cfg: DegradeConfig, split: tuple = (80, 20),
                 size: Optional[int] = None) -> tuple:
    """Pairs generated on the fly from a flat folder of clean PPMs -> (train, test)."""
    names = list_ppms(directory)
    if not names:
        raise ValueError(f"no .ppm images in {directory}")
    train_names, test_names = split_names(names, split, cfg.seed)

    def build(name):
        img = load_ppm(Path(directory) / name)
        if size is not None:
            img = center_crop(img, size)
        return make_pair(img, cfg, name)

    return [build(n) for n in train_names], [build(n) for n in test_names]


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    _, h, w = img.shape
    if h < size or w < size:
        raise ValueError(f"image {h}x{w} smaller than crop {size}")
    top, left = (h - size) // 2, (w - size) // 2
    return img[:, top:top + size, left:left + size]


def write_manifest(directory, rows: Sequence[dict]) -> Path:
    path = Path(directory) / MANIFEST_NAME
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in MANIFEST_FIELDS})
    return path


def read_manifest(directory) -> list:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {directory}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(MANIFEST_FIELDS) - set(rows[0]):
        raise ValueError(f"{path}: manifest is missing columns")
    return rows


def load_pairs(directory, split: Optional[str] = None) -> list:
    """Load (low, target) pairs listed in a degraded-data directory's manifest."""
    directory = Path(directory)
    pairs = []
    for row in read_manifest(directory):
        if split is not None and row["split"] != split:
            continue
        target_path = Path(row["target"])
        if not target_path.is_absolute():
            target_path = directory / target_path
        pairs.append(ImagePair(
            load_ppm(directory / row["filename"]), load_ppm(target_path),
            float(row["gamma"]), float(row["illum"]), int(row["seed"]), row["filename"],
        ))
    return pairs


def synthetic_images(n: int, size: int = 32, seed: int = 0) -> list:
    """Smooth, endoscopy-like RGB test images: reddish tissue tones, a vignette and soft blobs."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    images = []
    for _ in range(n):
        base = np.array([rng.uniform(0.6, 0.9), rng.uniform(0.3, 0.55), rng.uniform(0.2, 0.45)])
        cy, cx = rng.uniform(0.3, 0.7, size=2)
        vignette = 1.0 - 0.6 * ((yy - cy) ** 2 + (xx - cx) ** 2)
        field = np.zeros((size, size))
        for _ in range(4):
            by, bx = rng.uniform(0, 1, size=2)
            width = rng.uniform(0.05, 0.2)
            field += rng.uniform(-0.25, 0.25) * np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2 * width ** 2))
        ramp = rng.uniform(-0.15, 0.15) * xx + rng.uniform(-0.15, 0.15) * yy
        img = base[:, None, None] * (vignette + field + ramp)[None]
        img += 0.02 * np.sin(2 * np.pi * rng.uniform(2, 6) * (xx + yy))[None]
        images.append(np.clip(img, 0.02, 0.98).astype(np.float32))
    return images


def write_images(images: Sequence[np.ndarray], directory, prefix: str = "img") -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, img in enumerate(images):
        name = f"{prefix}{i:04d}.ppm"
        save_ppm(img, directory / name)
        names.append(name)
    return names


def relative_target(target: Path, out_dir: Path) -> str:
    return os.path.relpath(Path(target).resolve(), Path(out_dir).resolve())
