"""
Reverse diffusion refinement
============================

Noise schedule, one reverse step and the full chain in its three modes.
"""

import numpy as np

from llcaps.diffusion import DenoiserNet, DiffusionConfig, make_schedule, reverse_chain
from llcaps.tensor import Tensor

sched = make_schedule(DiffusionConfig(T=10))
print("beta  ", np.round(sched.beta, 5))
print("abar_T", sched.alpha_bar[-1])

# with a zero noise predictor the deterministic chain is a plain rescale
zero = lambda x, t: Tensor(np.zeros_like(x.data))
x = Tensor(np.full((1, 3, 4, 4), 0.5))
out = reverse_chain(x, zero, sched, "eval-deterministic").data
print("zero predictor:", out[0, 0, 0, 0], "=", 0.5 / np.sqrt(np.prod(sched.alpha)))

rng = np.random.default_rng(0)
net = DenoiserNet(8, rng, zero_init=False)
img = Tensor(rng.uniform(size=(1, 3, 16, 16)).astype(np.float32))
a = reverse_chain(img, net, sched, "eval-stochastic", seed=3).data
b = reverse_chain(img, net, sched, "eval-stochastic", seed=3).data
c = reverse_chain(img, net, sched, "eval-deterministic").data
print("same seed, same sample:", np.array_equal(a, b))
print("mean |stochastic - deterministic|:", float(np.abs(a - c).mean()))
