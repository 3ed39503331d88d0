"""Reverse-diffusion refinement of the CNN branch's shallow output.

The shallow image is treated as ``i_T`` and walked down a T-step Gaussian
Markov chain to ``i_0``. Each kernel uses the epsilon parameterisation

    mu = (i_t - beta_t / sqrt(1 - alpha_bar_t) * eps(i_t, t)) / sqrt(alpha_t)
    i_{t-1} = mu + sigma_t * z

with ``sigma_t**2`` either ``beta_t`` or the posterior variance
``beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)``. Noise is drawn from
an explicitly seeded generator and enters as a constant (reparameterised),
so the whole chain is differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .nn import Conv2d, Module, PReLU
from .tensor import Tensor

MODES = ("train", "eval-stochastic", "eval-deterministic")
VARIANCE_MODES = ("fixed-beta", "fixed-beta-tilde")


@dataclass
class DiffusionConfig:
    T: int = 10
    beta_start: float = 1e-4
    beta_end: float = 0.02
    width: int = 16
    variance_mode: str = "fixed-beta"
    stochastic: bool = True

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ValueError("need 0 < beta_start <= beta_end < 1")
        if self.variance_mode not in VARIANCE_MODES:
            raise ValueError(f"variance_mode must be one of {VARIANCE_MODES}")
        if self.width < 1:
            raise ValueError("denoiser width must be positive")


@dataclass
class NoiseSchedule:
    """beta_1..beta_T with derived alpha and cumulative alpha_bar (1-indexed accessors)."""

    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ValueError("every beta must lie in (0, 1)")
        if np.any(np.diff(self.beta) < 0):
            raise ValueError("beta must be nondecreasing")

    @property
    def T(self) -> int:
        return len(self.beta)

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    def abar(self, t: int) -> float:
        """alpha_bar_t with alpha_bar_0 = 1."""
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def sigma(self, t: int, variance_mode: str = "fixed-beta") -> float:
        beta_t = float(self.beta[t - 1])
        if variance_mode == "fixed-beta":
            return float(np.sqrt(beta_t))
        if variance_mode == "fixed-beta-tilde":
            return float(np.sqrt(beta_t * (1.0 - self.abar(t - 1)) / (1.0 - self.abar(t))))
        raise ValueError(f"unknown variance mode {variance_mode!r}")


def make_schedule(cfg: DiffusionConfig) -> NoiseSchedule:
    """Linear beta schedule from ``beta_start`` to ``beta_end`` over T steps."""
    return NoiseSchedule(np.linspace(cfg.beta_start, cfg.beta_end, cfg.T))


def time_embedding(t: int, width: int) -> np.ndarray:
    """Sinusoidal embedding of step ``t``, shaped 1×width×1×1 for channel-wise addition."""
    half = width // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    emb = np.concatenate([np.sin(t * freqs), np.cos(t * freqs)])
    if width % 2:
        emb = np.concatenate([emb, [0.0]])
    return emb.reshape(1, width, 1, 1)


class DenoiserNet(Module):
    """eps(i_t, t): conv -> +time embedding -> conv -> PReLU -> conv."""

    def __init__(self, width: int, rng: np.random.Generator, channels: int = 3, zero_init: bool = True):
        self.conv_in = Conv2d(channels, width, 3, rng)
        self.conv_mid = Conv2d(width, width, 3, rng)
        self.act = PReLU(width)
        self.conv_out = Conv2d(width, channels, 3, rng, zero=zero_init)
        self.width = width

    def forward(self, x: Tensor, t: int) -> Tensor:
        h = self.conv_in(x) + time_embedding(t, self.width).astype(x.dtype)
        return self.conv_out(self.act(self.conv_mid(h)))


def reverse_step(i_t: Tensor, t: int, net, sched: NoiseSchedule, noise: Optional[np.ndarray] = None,
                 variance_mode: str = "fixed-beta") -> Tensor:
    """Sample i_{t-1} from p(i_{t-1} | i_t); ``noise=None`` returns the mean.

    ``net`` is any callable ``(i_t, t) -> eps`` with the shape of ``i_t``.
    """
    if not 1 <= t <= sched.T:
        raise ValueError(f"step t={t} outside 1..{sched.T}")
    i_t = T.as_tensor(i_t)
    alpha_t = float(sched.alpha[t - 1])
    beta_t = float(sched.beta[t - 1])
    coef = beta_t / np.sqrt(1.0 - sched.abar(t))
    eps = net(i_t, t)
    mu = (i_t - eps * coef) / float(np.sqrt(alpha_t))
    if noise is None:
        return mu
    return mu + np.asarray(noise, dtype=i_t.dtype) * sched.sigma(t, variance_mode)


def reverse_chain(i_T: Tensor, net, sched: NoiseSchedule, mode: str = "eval-deterministic",
                  seed: int = 0, variance_mode: str = "fixed-beta", stochastic: bool = True) -> Tensor:
    """Run t = T..1. ``stochastic`` only matters in train mode; eval modes fix it."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    inject = mode == "eval-stochastic" or (mode == "train" and stochastic)
    rng = np.random.default_rng(seed)
    x = T.as_tensor(i_T)
    for t in range(sched.T, 0, -1):
        z = rng.standard_normal(x.shape) if inject and t > 1 else None
        x = reverse_step(x, t, net, sched, z, variance_mode)
    return x
