"""
Single-level Haar transform
===========================

Subband packing, perfect reconstruction and energy preservation.
"""

import numpy as np

from llcaps.data import synthetic_images
from llcaps.tensor import Tensor
from llcaps.wavelet import dwt2d, iwt2d, subbands

img = synthetic_images(1, 32, seed=4)[0][None]   # 1×3×32×32
packed = dwt2d(Tensor(img))
print("image", img.shape, "-> packed", packed.shape)

for name, band in subbands(packed).items():
    print(f"{name}: mean |coef| {np.abs(band).mean():.4f}")
# smooth images put nearly everything into LL

back = iwt2d(packed).data
print("reconstruction error", np.abs(back - img).max())
print("energy in / out", float((img.astype(np.float64) ** 2).sum()),
      float((packed.data.astype(np.float64) ** 2).sum()))
