"""
Curve attention, CWA and the multi-scale residual block
=======================================================
"""

import numpy as np

from llcaps.attention import CWABlock, CWAConfig, CurveAttention, MSRB, curve_step
from llcaps.tensor import Tensor

rng = np.random.default_rng(1)

# the curve map c·x·(1-x) never leaves [0, 1/4]
il = 0.8
for c in (0.5, 1.0, 0.9):
    il = curve_step(il, c)
    print(f"c={c}: IL={il:.4f}")

f = Tensor(rng.standard_normal((1, 16, 8, 8)).astype(np.float32))
state = CurveAttention(16, 4, rng).trace(f)
for n, it in enumerate(state.il):
    print(f"IL_{n}: min {it.data.min():.3f} max {it.data.max():.3f}")

# with a zero-initialised output conv the whole block starts as the identity
cfg = CWAConfig(channels=8)
block = CWABlock(cfg, rng)
x = Tensor(rng.standard_normal((2, 8, 16, 16)).astype(np.float32))
print("CWA identity at init:", np.array_equal(block(x).data, x.data))

# MSRB: full- and half-resolution streams fused by SKFF, plus a residual
msrb = MSRB(CWAConfig(channels=8, zero_init=False), rng)
out = msrb(x)
w = msrb.fuse.weights([msrb.full(x), msrb.full(x)])
print("MSRB out", out.shape, "| stream weights sum to", float(w.data.sum(axis=1).mean()))
print("parameters in one MSRB:", msrb.num_parameters())
