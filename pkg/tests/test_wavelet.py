import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llcaps.gradcheck import check_gradients
from llcaps.tensor import Tensor
from llcaps.wavelet import dwt2d, iwt2d, subbands

import oracles
from conftest import leaf, weighted_sum


def test_constant_image_has_only_ll():
    bands = subbands(dwt2d(Tensor(np.full((1, 2, 4, 4), 0.3))))
    np.testing.assert_allclose(bands["LL"], 0.6)
    for name in ("LH", "HL", "HH"):
        assert not bands[name].any()


def test_single_impulse_block():
    x = np.array([[1.0, 0.0], [0.0, 0.0]]).reshape(1, 1, 2, 2)
    out = dwt2d(Tensor(x)).data.ravel()
    np.testing.assert_array_equal(out, [0.5, 0.5, 0.5, 0.5])


def test_subband_order_and_shape(rng):
    x = rng.standard_normal((2, 3, 8, 6))
    out = dwt2d(Tensor(x))
    assert out.shape == (2, 12, 4, 3)
    np.testing.assert_allclose(out.data, oracles.haar(x))


def test_energy_preserved(rng):
    x = rng.standard_normal((1, 3, 8, 8)).astype(np.float32)
    e_in = float(np.sum(x.astype(np.float64) ** 2))
    e_out = float(np.sum(dwt2d(Tensor(x)).data.astype(np.float64) ** 2))
    assert abs(e_out - e_in) / e_in < 1e-5


def test_inverse_against_linear_solve_oracle(rng):
    p = rng.standard_normal((2, 8, 3, 4))
    np.testing.assert_allclose(iwt2d(Tensor(p)).data, oracles.ihaar(p), atol=1e-12)


def test_perfect_reconstruction_both_ways(rng):
    x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
    assert np.max(np.abs(iwt2d(dwt2d(Tensor(x))).data - x)) < 1e-6
    p = rng.standard_normal((2, 12, 4, 4)).astype(np.float32)
    assert np.max(np.abs(dwt2d(iwt2d(Tensor(p))).data - p)) < 1e-6


def test_zero_pack_gives_zero_image():
    assert not iwt2d(Tensor(np.zeros((1, 4, 2, 2)))).data.any()


def test_errors():
    with pytest.raises(ValueError, match="even"):
        dwt2d(Tensor(np.zeros((1, 1, 3, 4))))
    with pytest.raises(ValueError, match="divisible by 4"):
        iwt2d(Tensor(np.zeros((1, 6, 2, 2))))


@pytest.mark.parametrize("direction", ["dwt", "iwt"])
def test_gradients(rng, direction):
    fn = dwt2d if direction == "dwt" else iwt2d
    x = leaf(rng.standard_normal((2, 4, 4, 6)))
    probe = rng.standard_normal(fn(Tensor(x.data)).shape)
    # squared output makes the probe nonlinear in x
    assert check_gradients(lambda: weighted_sum(fn(x) * fn(x), probe), [x]) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_round_trip_property(n, c, h2, w2, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, (n, c, 2 * h2, 2 * w2)).astype(np.float32)
    packed = dwt2d(Tensor(x)).data
    assert np.max(np.abs(iwt2d(Tensor(packed)).data - x)) < 1e-6
    e_in = np.sum(x.astype(np.float64) ** 2)
    assert abs(np.sum(packed.astype(np.float64) ** 2) - e_in) <= 1e-5 * e_in
