"""Brightening dim endoscopy frames with a wavelet-attention CNN and a short
learned denoising chain, built on a small numpy autodiff engine."""

from .attention import CWAConfig, CurveState
from .data import DegradeConfig, ImagePair, degrade, load_ppm, save_ppm
from .diffusion import DiffusionConfig, NoiseSchedule, make_schedule, reverse_chain
from .metrics import avg_gradient, psnr, ssim
from .network import LLCapsModel, ModelConfig
from .tensor import Tensor, no_grad
from .training import TrainConfig, charbonnier_loss, train_loop

__version__ = "0.1.0"
