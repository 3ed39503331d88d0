"""
Training a tiny model end to end
================================

A few epochs on synthetic pairs; enough to see the loss fall.
"""

import logging

from llcaps import CWAConfig, DiffusionConfig, LLCapsModel, ModelConfig, TrainConfig
from llcaps.data import DegradeConfig, make_pair, synthetic_images
from llcaps.training import dataset_loss, evaluate, train_loop

logging.basicConfig(level=logging.INFO, format="%(message)s")

imgs = synthetic_images(6, 16, seed=0)
pairs = [make_pair(im, DegradeConfig(seed=0), f"img{i}") for i, im in enumerate(imgs)]
train, test = pairs[:4], pairs[4:]

cfg = ModelConfig(base_channels=8, n_msrb=2, cwa=CWAConfig(curve_order=2),
                  diffusion=DiffusionConfig(T=2, width=8))
model = LLCapsModel(cfg, seed=0)
print("parameters:", model.num_parameters())
print("loss before", round(dataset_loss(model, train), 4), "| PSNR/SSIM", evaluate(model, test))

report = train_loop(model, train, TrainConfig(epochs=5, batch_size=2, lr=1e-3), test_pairs=test)
print("loss after ", round(dataset_loss(model, train), 4), "| best PSNR", round(report.best_psnr, 2),
      "at epoch", report.best_epoch)
