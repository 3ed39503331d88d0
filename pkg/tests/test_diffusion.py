import numpy as np
import pytest

from llcaps.diffusion import (DenoiserNet, DiffusionConfig, NoiseSchedule, make_schedule, reverse_chain,
                              reverse_step, time_embedding)
from llcaps.gradcheck import check_gradients
from llcaps.tensor import Tensor


def zero_eps(x, t):
    return Tensor(np.zeros_like(x.data))


def const_eps(value):
    return lambda x, t: Tensor(np.full_like(x.data, value))


class TestSchedule:
    def test_single_step(self):
        s = make_schedule(DiffusionConfig(T=1, beta_start=1e-4, beta_end=0.02))
        np.testing.assert_array_equal(s.beta, [1e-4])

    def test_two_step_alpha_bar(self):
        s = make_schedule(DiffusionConfig(T=2, beta_start=0.1, beta_end=0.2))
        np.testing.assert_allclose(s.alpha_bar, [0.9, 0.72])
        assert s.abar(0) == 1.0

    def test_product_oracle_defaults(self):
        s = make_schedule(DiffusionConfig())
        assert s.T == 10
        direct = float(np.prod([1.0 - b for b in np.linspace(1e-4, 0.02, 10)]))
        incremental = 1.0
        for b in s.beta:
            incremental *= 1.0 - b
        assert abs(s.alpha_bar[-1] - direct) < 1e-12
        assert abs(s.alpha_bar[-1] - incremental) < 1e-12

    @pytest.mark.parametrize("T", [1, 2, 5, 10, 50])
    def test_invariants(self, T):
        s = make_schedule(DiffusionConfig(T=T))
        assert np.all((s.beta > 0) & (s.beta < 1))
        assert np.all(np.diff(s.beta) >= 0)
        assert np.all(np.diff(np.concatenate([[1.0], s.alpha_bar])) < 0)

    def test_posterior_variance(self):
        s = NoiseSchedule([0.1, 0.2])
        assert s.sigma(2, "fixed-beta") == pytest.approx(np.sqrt(0.2))
        assert s.sigma(2, "fixed-beta-tilde") == pytest.approx(np.sqrt(0.2 * 0.1 / 0.28))
        assert s.sigma(1, "fixed-beta-tilde") == 0.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            DiffusionConfig(beta_start=0.1, beta_end=0.01)
        with pytest.raises(ValueError):
            DiffusionConfig(T=-1)
        with pytest.raises(ValueError):
            NoiseSchedule([0.2, 0.1])


class TestReverseStep:
    def test_vanishing_beta_is_identity(self, rng):
        s = NoiseSchedule([1e-12])
        x = rng.uniform(size=(1, 3, 4, 4))
        np.testing.assert_allclose(reverse_step(Tensor(x), 1, zero_eps, s).data, x, atol=1e-6)

    def test_zero_eps_divides_by_sqrt_alpha(self, rng):
        s = NoiseSchedule([0.1, 0.2])
        x = rng.uniform(size=(1, 3, 4, 4))
        out = reverse_step(Tensor(x), 2, zero_eps, s).data
        np.testing.assert_array_equal(out, x / np.sqrt(0.8))

    def test_hand_evaluated_kernel(self, rng):
        s = NoiseSchedule([0.1, 0.2])
        x = rng.uniform(size=(1, 3, 4, 4))
        # t = 1: alpha = 0.9, beta = 0.1, alpha_bar = 0.9
        expected = (x - 0.1 / np.sqrt(1 - 0.9) * 0.3) / np.sqrt(0.9)
        np.testing.assert_allclose(reverse_step(Tensor(x), 1, const_eps(0.3), s).data, expected, rtol=1e-12)

    def test_noise_scaled_by_sigma(self, rng):
        s = NoiseSchedule([0.1, 0.2])
        x = rng.uniform(size=(1, 3, 4, 4))
        z = rng.standard_normal(x.shape)
        out = reverse_step(Tensor(x), 2, zero_eps, s, noise=z).data
        np.testing.assert_allclose(out, x / np.sqrt(0.8) + np.sqrt(0.2) * z)

    def test_range(self):
        s = NoiseSchedule([0.1])
        with pytest.raises(ValueError):
            reverse_step(Tensor(np.zeros((1, 3, 2, 2))), 2, zero_eps, s)
        with pytest.raises(ValueError):
            reverse_step(Tensor(np.zeros((1, 3, 2, 2))), 0, zero_eps, s)


class TestReverseChain:
    def test_empty_chain(self, rng):
        x = Tensor(rng.uniform(size=(1, 3, 4, 4)))
        assert reverse_chain(x, zero_eps, make_schedule(DiffusionConfig(T=0))) is x

    def test_telescoped_closed_form(self, rng):
        s = make_schedule(DiffusionConfig(T=3, beta_start=0.05, beta_end=0.15))
        x = rng.uniform(size=(2, 3, 4, 4))
        out = reverse_chain(Tensor(x), zero_eps, s).data
        np.testing.assert_allclose(out, x / np.sqrt(np.prod(s.alpha)), atol=1e-6)

    def test_deterministic_bit_identical(self, rng):
        net = DenoiserNet(4, rng, zero_init=False)
        s = make_schedule(DiffusionConfig(T=4))
        x = Tensor(rng.uniform(size=(1, 3, 8, 8)).astype(np.float32))
        a = reverse_chain(x, net, s, "eval-deterministic").data
        b = reverse_chain(x, net, s, "eval-deterministic").data
        assert np.array_equal(a, b)

    def test_stochastic_reproducible_under_seed(self, rng):
        net = DenoiserNet(4, rng, zero_init=False)
        s = make_schedule(DiffusionConfig(T=4))
        x = Tensor(rng.uniform(size=(1, 3, 8, 8)).astype(np.float32))
        a = reverse_chain(x, net, s, "eval-stochastic", seed=7).data
        b = reverse_chain(x, net, s, "eval-stochastic", seed=7).data
        c = reverse_chain(x, net, s, "eval-stochastic", seed=8).data
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_train_mode_respects_stochastic_flag(self, rng):
        s = make_schedule(DiffusionConfig(T=3))
        x = Tensor(rng.uniform(size=(1, 3, 4, 4)))
        det = reverse_chain(x, zero_eps, s, "eval-deterministic").data
        quiet = reverse_chain(x, zero_eps, s, "train", seed=3, stochastic=False).data
        noisy = reverse_chain(x, zero_eps, s, "train", seed=3, stochastic=True).data
        assert np.array_equal(det, quiet)
        assert not np.array_equal(det, noisy)

    def test_unknown_mode(self, rng):
        with pytest.raises(ValueError):
            reverse_chain(Tensor(np.zeros((1, 3, 2, 2))), zero_eps, NoiseSchedule([0.1]), "sample")

    def test_gradients_reach_input_and_denoiser(self, rng):
        net = DenoiserNet(4, rng, zero_init=False).astype(np.float64)
        s = make_schedule(DiffusionConfig(T=2, beta_start=0.05, beta_end=0.1))
        x = Tensor(rng.uniform(size=(1, 3, 4, 4)), requires_grad=True)
        probe = rng.standard_normal((1, 3, 4, 4))
        fn = lambda: (reverse_chain(x, net, s, "train", seed=1) * probe).sum()
        assert check_gradients(fn, [x] + net.parameters(), max_entries=10) < 1e-3


def test_time_embedding_shape_and_distinct():
    a, b = time_embedding(1, 6), time_embedding(2, 6)
    assert a.shape == (1, 6, 1, 1)
    assert not np.allclose(a, b)
    assert time_embedding(3, 5).shape == (1, 5, 1, 1)


def test_denoiser_shape(rng):
    net = DenoiserNet(8, rng)
    x = Tensor(rng.uniform(size=(2, 3, 8, 8)).astype(np.float32))
    out = net(x, 3)
    assert out.shape == x.shape
    assert not out.data.any()  # zero-initialized output conv
