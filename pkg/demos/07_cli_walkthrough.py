"""
Command line walkthrough
========================

Same calls as ``llcaps degrade ...`` etc. from a shell, driven through ``main``.
"""

import tempfile
from pathlib import Path

from llcaps.cli import main
from llcaps.data import synthetic_images, write_images

tmp = Path(tempfile.mkdtemp())
write_images(synthetic_images(5, 16, seed=1), tmp / "clean")
(tmp / "tiny.cfg").write_text(
    "model.base_channels=8\nmodel.n_msrb=2\ncwa.curve_order=2\ndiffusion.T=2\ndiffusion.width=4\n"
)

main(["degrade", "--input", str(tmp / "clean"), "--output", str(tmp / "low"), "--seed", "1"])
print((tmp / "low" / "manifest.csv").read_text())

main(["train", "--data", str(tmp / "low"), "--config", str(tmp / "tiny.cfg"),
      "--epochs", "2", "--lr", "1e-3", "--out", str(tmp / "model.ckpt")])
print((tmp / "model.ckpt.metrics.csv").read_text())

main(["enhance", "--ckpt", str(tmp / "model.ckpt"), "--input", str(tmp / "low" / "img0000.ppm"),
      "--output", str(tmp / "enhanced.ppm"), "--deterministic"])
main(["eval", "--ckpt", str(tmp / "model.ckpt"), "--data", str(tmp / "low"),
      "--out", str(tmp / "report.csv"), "--deterministic"])
print((tmp / "report.csv").read_text())
print("artifacts in", tmp)
