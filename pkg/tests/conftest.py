import numpy as np
import pytest

from llcaps.attention import CWAConfig
from llcaps.diffusion import DiffusionConfig
from llcaps.network import ModelConfig
from llcaps.tensor import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def leaf(arr, dtype=np.float64):
    return Tensor(np.array(arr, dtype=dtype), requires_grad=True)


def weighted_sum(out, weights):
    """Scalar probe with non-uniform weights so symmetric errors cannot cancel."""
    return (out * weights).sum()


@pytest.fixture
def tiny_config():
    return ModelConfig(base_channels=8, n_msrb=2, zero_init=False,
                       cwa=CWAConfig(curve_order=2), diffusion=DiffusionConfig(T=2, width=4))
