import pytest

from llcaps.attention import CWAConfig
from llcaps.config import ConfigError, dump_config, load_config
from llcaps.data import DegradeConfig
from llcaps.diffusion import DiffusionConfig
from llcaps.network import ModelConfig
from llcaps.training import TrainConfig


def test_round_trip():
    model = ModelConfig(base_channels=12, n_msrb=4, zero_init=False,
                        cwa=CWAConfig(curve_order=3, curve_form="additive", use_wavelet=False),
                        diffusion=DiffusionConfig(T=5, beta_end=0.03, variance_mode="fixed-beta-tilde"))
    train = TrainConfig(epochs=7, lr=3e-4, grad_clip=1.5)
    degrade = DegradeConfig(gamma_min=1.5, seed=9)
    assert load_config(dump_config(model, train, degrade)) == (model, train, degrade)


def test_defaults_and_comments():
    model, train, _ = load_config("# comment\n\ntrain.epochs = 3  # inline\ntrain.grad_clip=none\n")
    assert model == ModelConfig()
    assert train.epochs == 3 and train.grad_clip is None and train.lr == 1e-4


def test_unknown_key():
    with pytest.raises(ConfigError, match="model.width"):
        load_config("model.width=3\n")


def test_bad_values():
    with pytest.raises(ConfigError, match="train.epochs"):
        load_config("train.epochs=many\n")
    with pytest.raises(ConfigError):
        load_config("cwa.use_curve=maybe\n")
    with pytest.raises(ConfigError):
        load_config("train.lr=-1\n")
    with pytest.raises(ConfigError, match="key=value"):
        load_config("justtext\n")
