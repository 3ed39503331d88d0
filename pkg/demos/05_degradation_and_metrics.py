"""
Synthetic low light and image quality metrics
=============================================
"""

import tempfile
from pathlib import Path

import numpy as np

from llcaps.data import DegradeConfig, load_ppm, make_pair, save_ppm, synthetic_images
from llcaps.metrics import avg_gradient, psnr, ssim

target = synthetic_images(1, 64, seed=2)[0]
pair = make_pair(target, DegradeConfig(seed=7), "demo.ppm")
print(f"gamma {pair.gamma:.3f}  illumination {pair.illum:.3f}")
print(f"mean luminance {pair.target.mean():.3f} -> {pair.low.mean():.3f}")

print(f"PSNR  {psnr(pair.low, pair.target):.2f} dB")
print(f"SSIM  {100 * ssim(pair.low, pair.target):.2f} %")
print("AG target / low", avg_gradient(pair.target)[0], avg_gradient(pair.low)[0])

# knowing gamma and s, the clean image comes back (up to 8-bit rounding)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "low.ppm"
    save_ppm(pair.low, path)
    low = load_ppm(path)
recovered = np.clip(low / pair.illum, 0, 1) ** (1 / pair.gamma)
print("recovered PSNR", round(psnr(recovered, pair.target), 2), "dB")
