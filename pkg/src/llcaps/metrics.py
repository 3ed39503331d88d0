"""PSNR, SSIM and average gradient on images in [0, 1].

All functions accept numpy arrays or Tensors shaped C×H×W or N×C×H×W and
compute in float64.
"""

import numpy as np

PSNR_CAP = 99.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def psnr(y, y_star, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP`` (identical images hit the cap)."""
    a, b = _array(y), _array(y_star)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    h, w = a.shape[-2:]
    rows = sum(g[i] * a[..., i:h - k + 1 + i, :] for i in range(k))
    return sum(g[i] * rows[..., :, i:w - k + 1 + i] for i in range(k))


def ssim(y, y_star, data_range: float = 1.0) -> float:
    """Single-scale SSIM with an 11×11 Gaussian window (sigma 1.5), valid positions only,
    averaged over channels, positions and batch."""
    a, b = _array(y), _array(y_star)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim < 2 or min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}")
    g = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def avg_gradient(y) -> tuple:
    """Mean and variance of sqrt((dx^2 + dy^2) / 2) over the (H-1)×(W-1) forward-difference grid.

    Higher values indicate richer high-frequency detail.
    """
    a = _array(y)
    if a.ndim < 2 or min(a.shape[-2:]) < 2:
        raise ValueError(f"average gradient needs H, W >= 2, got {a.shape}")
    dx = a[..., :-1, 1:] - a[..., :-1, :-1]
    dy = a[..., 1:, :-1] - a[..., :-1, :-1]
    g = np.sqrt((dx * dx + dy * dy) / 2.0)
    return float(g.mean()), float(g.var())
