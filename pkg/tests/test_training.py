import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from llcaps.checkpoint import CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint
from llcaps.data import ImagePair
from llcaps.network import LLCapsModel
from llcaps.nn import Parameter
from llcaps.tensor import Tensor
from llcaps.training import (Adam, TrainConfig, TrainingDiverged, TrainReport, charbonnier_loss, dataset_loss,
                             step_seed, train_loop)


def pairs(n, size=16, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        target = rng.uniform(0.2, 0.9, (3, size, size)).astype(np.float32)
        out.append(ImagePair(0.3 * target ** 2, target, 2.0, 0.3, i, f"p{i}"))
    return out


class TestCharbonnier:
    def test_equal_inputs_give_eps(self, rng):
        y = rng.uniform(size=(2, 3, 4, 4))
        assert charbonnier_loss(Tensor(y), y).item() == pytest.approx(1e-3, rel=1e-12)

    def test_single_element(self):
        loss = charbonnier_loss(Tensor(np.array([3e-3])), np.array([0.0]))
        assert loss.item() == pytest.approx(math.sqrt(10) * 1e-3, rel=1e-12)

    def test_loop_oracle(self, rng):
        a, b = rng.uniform(size=(2, 3, 5, 5)), rng.uniform(size=(2, 3, 5, 5))
        expected = sum(math.sqrt((x - y) ** 2 + 1e-6) for x, y in zip(a.ravel(), b.ravel())) / a.size
        assert abs(charbonnier_loss(Tensor(a), b).item() - expected) < 1e-7

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.floats(1e-4, 1e-1))
    def test_lower_bound(self, diffs, eps):
        d = np.array(diffs)
        loss = charbonnier_loss(Tensor(d), np.zeros_like(d), eps).item()
        assert loss >= eps * (1 - 1e-12)
        if np.any(d != 0) and np.max(np.abs(d)) > 1e-6:
            assert loss > eps

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            charbonnier_loss(Tensor(np.zeros(3)), np.zeros(4))


class TestAdam:
    def test_zero_grad_decays_moments(self):
        p = Parameter(np.array([0.5, -1.0]), dtype=np.float64)
        opt = Adam([p], lr=1e-2)
        opt.m[0][:] = 1.0
        opt.v[0][:] = 1.0
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_allclose(opt.m[0], 0.9)
        np.testing.assert_allclose(opt.v[0], 0.999)

    def test_truly_fresh_zero_grad(self):
        p = Parameter(np.array([0.5, -1.0]), dtype=np.float64)
        opt = Adam([p], lr=1e-2)
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_array_equal(p.data, [0.5, -1.0])

    def test_first_step_is_lr_times_sign(self):
        p = Parameter(np.array([1.0, 1.0]), dtype=np.float64)
        opt = Adam([p], lr=1e-4)
        p.grad = np.array([2.0, -0.5])
        opt.step()
        np.testing.assert_allclose(p.data - 1.0, [-1e-4, 1e-4], rtol=1e-6)

    def test_two_steps_scalar_oracle(self):
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        grads = [0.3, -0.7]
        x, m, v = 0.25, 0.0, 0.0
        for t, g in enumerate(grads, 1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            x -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        p = Parameter(np.array([0.25]), dtype=np.float64)
        opt = Adam([p], lr=lr, betas=(b1, b2), eps=eps)
        for g in grads:
            p.grad = np.array([g])
            opt.step()
        assert abs(p.data[0] - x) < 1e-10

    def test_grad_clip(self):
        p = Parameter(np.zeros(2), dtype=np.float64)
        opt = Adam([p], lr=1.0, grad_clip=1.0)
        p.grad = np.array([30.0, 40.0])
        opt.step()
        assert opt.m[0] == pytest.approx([0.1 * 0.6, 0.1 * 0.8])

    def test_missing_grad(self):
        p = Parameter(np.zeros(2))
        p.name = "w"
        with pytest.raises(ValueError, match="w"):
            Adam([p]).step()


def test_step_seed_distinct():
    seeds = {step_seed(0, s) for s in range(100)}
    assert len(seeds) == 100
    assert step_seed(3, 5) == step_seed(3, 5)


def test_train_config_validation():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.batch_size, cfg.lr) == (200, 4, 1e-4)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1)
    with pytest.raises(ValueError):
        TrainConfig(charbonnier_eps=0)


class TestLoop:
    def test_zero_lr_keeps_parameters(self, tiny_config):
        model = LLCapsModel(tiny_config)
        before = {n: p.data.copy() for n, p in model.named_parameters()}
        train_loop(model, pairs(3), TrainConfig(epochs=1, batch_size=2, lr=0.0))
        for n, p in model.named_parameters():
            assert np.array_equal(p.data, before[n]), n

    def test_identical_seeds_identical_curves(self, tiny_config):
        cfg = TrainConfig(epochs=2, batch_size=2, lr=1e-3, seed=4)
        reports = []
        for _ in range(2):
            model = LLCapsModel(tiny_config, seed=1)
            reports.append(train_loop(model, pairs(3), cfg, test_pairs=pairs(1, seed=9)))
        assert reports[0].step_loss == reports[1].step_loss
        assert reports[0].epoch_psnr == reports[1].epoch_psnr
        assert len(reports[0].step_loss) == 4

    def test_loss_decreases(self, tiny_config):
        model = LLCapsModel(tiny_config)
        data = pairs(4)
        before = dataset_loss(model, data)
        train_loop(model, data, TrainConfig(epochs=3, batch_size=2, lr=1e-3))
        assert dataset_loss(model, data) < before

    def test_divergence_reports(self, tiny_config):
        bad = pairs(2)
        bad[1].target = np.full_like(bad[1].target, np.nan)
        with pytest.raises(TrainingDiverged) as info:
            train_loop(LLCapsModel(tiny_config), bad, TrainConfig(epochs=1, batch_size=2))
        assert isinstance(info.value.report, TrainReport)

    def test_empty_dataset(self, tiny_config):
        with pytest.raises(ValueError, match="empty"):
            train_loop(LLCapsModel(tiny_config), [], TrainConfig(epochs=1))

    def test_best_checkpoint_written(self, tiny_config, tmp_path):
        path = tmp_path / "best.ckpt"
        seen = []
        report = train_loop(LLCapsModel(tiny_config), pairs(2), TrainConfig(epochs=2, batch_size=2, lr=1e-3),
                            test_pairs=pairs(1, seed=5), checkpoint=str(path),
                            on_epoch=lambda e, r: seen.append(e))
        assert path.exists() and seen == [1, 2]
        assert report.best_psnr == max(report.epoch_psnr)
        assert report.rows()[0][0] == 1


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tiny_config, tmp_path):
        model = LLCapsModel(tiny_config, seed=2)
        save_checkpoint(model, tmp_path / "m.ckpt")
        restored = load_checkpoint(tmp_path / "m.ckpt")
        assert restored.config == model.config
        for (n, a), (_, b) in zip(model.named_parameters(), restored.named_parameters()):
            assert np.array_equal(a.data, b.data) and a.data.dtype == b.data.dtype, n
        _, tensors = read_checkpoint(tmp_path / "m.ckpt")
        assert np.array_equal(tensors["schedule.beta"], model.schedule.beta)

    def test_restored_model_reproduces_outputs(self, tiny_config, tmp_path, rng):
        model = LLCapsModel(tiny_config, seed=2)
        save_checkpoint(model, tmp_path / "m.ckpt")
        restored = load_checkpoint(tmp_path / "m.ckpt")
        x = rng.uniform(size=(1, 3, 16, 16)).astype(np.float32)
        assert np.array_equal(model.enhance(x), restored.enhance(x))

    def test_save_is_deterministic(self, tiny_config, tmp_path):
        save_checkpoint(LLCapsModel(tiny_config, seed=2), tmp_path / "a")
        save_checkpoint(LLCapsModel(tiny_config, seed=2), tmp_path / "b")
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_truncated(self, tiny_config, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(LLCapsModel(tiny_config), path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError, match="corrupt"):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"NOTACKPT" + bytes(16))
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)

    def test_mismatched_config_names_parameter(self, tiny_config, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(LLCapsModel(tiny_config), path)
        other = LLCapsModel(replace(tiny_config, base_channels=12))
        with pytest.raises(CheckpointError, match="sfe.weight"):
            load_checkpoint(path, other)

    def test_mismatched_schedule(self, tiny_config, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(LLCapsModel(tiny_config), path)
        other = LLCapsModel(replace(tiny_config, diffusion=replace(tiny_config.diffusion, beta_end=0.05)))
        with pytest.raises(CheckpointError, match="schedule"):
            load_checkpoint(path, other)
