"""Charbonnier loss, Adam and the end-to-end training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor as T
from .metrics import psnr, ssim
from .tensor import NonFiniteError, Tensor

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 4
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    charbonnier_eps: float = 1e-3
    grad_clip: Optional[float] = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.adam_eps <= 0 or self.charbonnier_eps <= 0:
            raise ValueError("epsilons must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")


def charbonnier_loss(y: Tensor, y_star, eps: float = 1e-3) -> Tensor:
    """Mean over elements of sqrt((y - y*)^2 + eps^2)."""
    y = T.as_tensor(y)
    y_star = T.as_tensor(y_star, dtype=y.dtype)
    if y.shape != y_star.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {y_star.shape}")
    d = y - y_star
    return T.mean(T.sqrt(d * d + eps * eps))


class Adam:
    """Bias-corrected Adam over a fixed list of parameters."""

    def __init__(self, params: Sequence, lr: float = 1e-4, betas: tuple = (0.9, 0.999),
                 eps: float = 1e-8, grad_clip: Optional[float] = None):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.grad_clip = grad_clip
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"parameter {getattr(p, 'name', '') or '?'} has no gradient")
        grads = [p.grad for p in self.params]
        if self.grad_clip is not None:
            norm = float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)))
            if norm > self.grad_clip:
                grads = [g * (self.grad_clip / norm) for g in grads]
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.data = (p.data - update).astype(p.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.data)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, report: "TrainReport"):
        super().__init__(message)
        self.report = report


@dataclass
class TrainReport:
    epoch_loss: list = field(default_factory=list)
    epoch_psnr: list = field(default_factory=list)
    epoch_ssim: list = field(default_factory=list)
    step_loss: list = field(default_factory=list)
    best_psnr: float = float("-inf")
    best_epoch: int = -1

    def rows(self) -> list:
        return [
            (i + 1, self.epoch_loss[i], self.epoch_psnr[i], self.epoch_ssim[i])
            for i in range(len(self.epoch_loss))
        ]


def stack_pairs(pairs: Sequence) -> tuple:
    low = np.stack([p.low for p in pairs]).astype(np.float32)
    target = np.stack([p.target for p in pairs]).astype(np.float32)
    return low, target


def step_seed(seed: int, step: int) -> int:
    return int(np.random.SeedSequence([seed, step]).generate_state(1)[0])


def evaluate(model, pairs: Sequence, seed: int = 0) -> tuple:
    """Mean PSNR and SSIM of deterministic model output against targets."""
    if not pairs:
        return float("nan"), float("nan")
    low, target = stack_pairs(pairs)
    out = np.clip(model.forward(low, "eval-deterministic", seed).data, 0.0, 1.0)
    return (float(np.mean([psnr(o, t) for o, t in zip(out, target)])),
            float(np.mean([ssim(o, t) for o, t in zip(out, target)])))


def dataset_loss(model, pairs: Sequence, eps: float = 1e-3, seed: int = 0) -> float:
    """Charbonnier loss of deterministic output over all pairs at once."""
    low, target = stack_pairs(pairs)
    out = model.forward(low, "eval-deterministic", seed)
    return float(charbonnier_loss(out, target, eps).item())


def train_loop(model, train_pairs: Sequence, cfg: TrainConfig, test_pairs: Sequence = (),
               checkpoint: Optional[str] = None,
               on_epoch: Optional[Callable[[int, "TrainReport"], None]] = None) -> TrainReport:
    """Seeded-shuffle minibatch training on the Charbonnier loss of the final output.

    After each epoch the model is scored on ``test_pairs`` (PSNR/SSIM, deterministic
    chain); the best-PSNR weights are written to ``checkpoint`` when given.
    """
    if not train_pairs:
        raise ValueError("training set is empty")
    from .checkpoint import save_checkpoint

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), cfg.lr, (cfg.beta1, cfg.beta2), cfg.adam_eps, cfg.grad_clip)
    report = TrainReport()
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_pairs))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_pairs[i] for i in order[start:start + cfg.batch_size]]
            low, target = stack_pairs(batch)
            try:
                out = model.forward(low, "train", step_seed(cfg.seed, step))
                loss = charbonnier_loss(out, target, cfg.charbonnier_eps)
            except NonFiniteError as exc:
                raise TrainingDiverged(f"epoch {epoch + 1} step {step + 1}: {exc}", report) from exc
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at step {step + 1}", report)
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(value)
            report.step_loss.append(value)
            step += 1
        report.epoch_loss.append(float(np.mean(losses)))
        p, s = evaluate(model, test_pairs)
        report.epoch_psnr.append(p)
        report.epoch_ssim.append(s)
        log.info("epoch %d loss %.6f psnr %.3f ssim %.4f", epoch + 1, report.epoch_loss[-1], p, s)
        improved = test_pairs and p > report.best_psnr
        if improved:
            report.best_psnr, report.best_epoch = p, epoch + 1
        if checkpoint is not None and (improved or not test_pairs):
            save_checkpoint(model, checkpoint)
        if on_epoch is not None:
            on_epoch(epoch + 1, report)
    return report
