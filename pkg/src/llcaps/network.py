"""The full enhancement model: CNN branch followed by reverse-diffusion refinement."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import MSRB, CWAConfig
from .diffusion import DenoiserNet, DiffusionConfig, make_schedule, reverse_chain, MODES
from .nn import Conv2d, Module
from .tensor import Tensor, as_tensor, no_grad


@dataclass
class ModelConfig:
    base_channels: int = 32
    n_msrb: int = 6
    conv_every: int = 2
    zero_init: bool = True
    cwa: CWAConfig = field(default_factory=CWAConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)

    def __post_init__(self):
        if self.n_msrb < 1:
            raise ValueError("n_msrb must be >= 1")
        if self.conv_every < 1:
            raise ValueError("conv_every must be >= 1")
        if self.base_channels < 4 or self.base_channels % 2:
            raise ValueError("base_channels must be an even number >= 4")
        # the model owns channel width and init policy; keep the block config in step
        self.cwa = replace(self.cwa, channels=self.base_channels, zero_init=self.zero_init)


class LLCapsModel(Module):
    """SFE conv, stacked MSRBs with a conv after every ``conv_every`` of them, OPM conv
    with a global residual, then the denoiser-driven reverse chain."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config.base_channels
        self.sfe = Conv2d(3, c, 3, rng)
        self.msrbs = [MSRB(config.cwa, rng) for _ in range(config.n_msrb)]
        self.inter_convs = [Conv2d(c, c, 3, rng) for _ in range(config.n_msrb // config.conv_every)]
        self.opm = Conv2d(c, 3, 3, rng, zero=config.zero_init)
        self.denoiser = DenoiserNet(config.diffusion.width, rng, zero_init=config.zero_init)
        self.schedule = make_schedule(config.diffusion)
        self.assign_names()

    def cnn_branch(self, x: Tensor) -> Tensor:
        """Shallow output ``opm(MSRBs(sfe(x))) + x``."""
        x = as_tensor(x)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"expected N×3×H×W input, got {x.shape}")
        h, w = x.shape[2:]
        if h % 4 or w % 4:
            raise ValueError(f"height and width must be divisible by 4, got {h}x{w}")
        f = self.sfe(x)
        k = 0
        for i, block in enumerate(self.msrbs):
            f = block(f)
            if (i + 1) % self.config.conv_every == 0:
                f = self.inter_convs[k](f)
                k += 1
        return self.opm(f) + x

    def refine(self, shallow: Tensor, mode: str = "eval-deterministic", seed: int = 0) -> Tensor:
        d = self.config.diffusion
        return reverse_chain(shallow, self.denoiser, self.schedule, mode, seed,
                             d.variance_mode, d.stochastic)

    def forward(self, x, mode: str = "eval-deterministic", seed: int = 0) -> Tensor:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "train":
            return self.refine(self.cnn_branch(x), mode, seed)
        with no_grad():
            return self.refine(self.cnn_branch(x), mode, seed)

    def enhance(self, images: np.ndarray, deterministic: bool = True, seed: int = 0) -> np.ndarray:
        """Convenience wrapper: N×3×H×W (or 3×H×W) array in, array out."""
        arr = np.asarray(images, dtype=self.sfe.weight.dtype)
        single = arr.ndim == 3
        batch = arr[None] if single else arr
        mode = "eval-deterministic" if deterministic else "eval-stochastic"
        out = self.forward(batch, mode, seed).data
        return out[0] if single else out
