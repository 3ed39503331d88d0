"""
Reverse-mode autodiff on numpy arrays
=====================================

Build a tiny graph, run backward, and compare against central differences.
"""

import numpy as np

from llcaps import tensor as T
from llcaps.gradcheck import check_gradients
from llcaps.tensor import Tensor

rng = np.random.default_rng(0)

# leaves that want gradients; float64 so finite differences are meaningful
x = Tensor(rng.uniform(-1, 1, (1, 3, 6, 6)), requires_grad=True)
w = Tensor(rng.normal(0, 0.3, (4, 3, 3, 3)), requires_grad=True)
b = Tensor(np.zeros(4), requires_grad=True)

y = T.sigmoid(T.conv2d(x, w, b, padding=1))
loss = T.mean(y * y)
loss.backward()
print("loss", loss.item())
print("dL/dw shape", w.grad.shape, "norm", np.linalg.norm(w.grad))

# the tape is single use
try:
    loss.backward()
except T.TapeConsumedError as exc:
    print("second backward:", exc)

# numeric check of the same graph
err = check_gradients(lambda: T.mean(T.sigmoid(T.conv2d(x, w, b, padding=1)) ** 2), [x, w, b])
print(f"max relative error vs central differences: {err:.2e}")

# no_grad skips recording entirely
with T.no_grad():
    z = T.conv2d(x, w, b, padding=1)
print("recorded under no_grad:", z.requires_grad)
