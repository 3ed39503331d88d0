"""Command line: ``llcaps {degrade,train,enhance,eval,ablate}``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
Diagnostics go to stderr; results go to files.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ablation
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, load_config
from .data import (DegradeConfig, PPMError, degrade, draw_degradation, list_ppms, load_pairs, load_ppm,
                   relative_target, save_ppm, split_names, write_manifest)
from .metrics import avg_gradient, psnr, ssim
from .network import LLCapsModel
from .training import TrainingDiverged, train_loop

log = logging.getLogger("llcaps")

RUNTIME_ERRORS = (OSError, PPMError, CheckpointError, ConfigError, TrainingDiverged, ValueError)


def _split_arg(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("split must look like 80,20") from None
    return a, b


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llcaps", description="Enhance dim endoscopy images.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="synthesize low-light inputs from clean PPMs")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    defaults = DegradeConfig()
    p.add_argument("--gamma-min", type=float, default=defaults.gamma_min)
    p.add_argument("--gamma-max", type=float, default=defaults.gamma_max)
    p.add_argument("--illum-min", type=float, default=defaults.illum_min)
    p.add_argument("--illum-max", type=float, default=defaults.illum_max)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--split", type=_split_arg, default=(80.0, 20.0), help="train,test percentages")

    def training_flags(p):
        p.add_argument("--data", required=True, type=Path)
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--epochs", type=int, help="default 200")
        p.add_argument("--batch", type=int, help="default 4")
        p.add_argument("--lr", type=float, help="default 1e-4")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model on a degraded-data directory")
    training_flags(p)
    p.add_argument("--out", required=True, type=Path, help="checkpoint path")
    p.add_argument("--log", type=Path, help="per-epoch CSV (default: <out>.metrics.csv)")

    p = sub.add_parser("enhance", help="enhance one PPM image")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--output", required=True, type=Path)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="score a checkpoint on paired data")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--split", default="test", help="manifest split to score; falls back to all rows")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", help="train and score all 8 component on/off configurations")
    training_flags(p)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    return parser


def resolve_configs(args) -> tuple:
    text = args.config.read_text() if getattr(args, "config", None) else ""
    model_cfg, train_cfg, degrade_cfg = load_config(text)
    overrides = {k: v for k, v in (("epochs", args.epochs), ("batch_size", args.batch),
                                   ("lr", args.lr), ("seed", args.seed)) if v is not None}
    if overrides:
        train_cfg = replace(train_cfg, **overrides)
    return model_cfg, train_cfg, degrade_cfg


def cmd_degrade(args) -> int:
    cfg = DegradeConfig(args.gamma_min, args.gamma_max, args.illum_min, args.illum_max, args.seed)
    names = list_ppms(args.input)
    if not names:
        raise ValueError(f"no .ppm images in {args.input}")
    args.output.mkdir(parents=True, exist_ok=True)
    train, _ = split_names(names, args.split, cfg.seed)
    train = set(train)
    rows = []
    for name in names:
        img = load_ppm(args.input / name)
        gamma, illum, item_seed = draw_degradation(cfg, name)
        save_ppm(degrade(img, gamma, illum), args.output / name)
        rows.append({"filename": name, "split": "train" if name in train else "test",
                     "gamma": repr(gamma), "illum": repr(illum), "seed": item_seed,
                     "target": relative_target(args.input / name, args.output)})
    write_manifest(args.output, rows)
    log.info("wrote %d degraded images to %s", len(rows), args.output)
    return 0


def _pairs(data_dir, split):
    pairs = load_pairs(data_dir, split)
    return pairs if pairs else load_pairs(data_dir)


def cmd_train(args) -> int:
    model_cfg, train_cfg, _ = resolve_configs(args)
    train_pairs = load_pairs(args.data, "train") or load_pairs(args.data)
    test_pairs = load_pairs(args.data, "test")
    if not train_pairs:
        raise ValueError(f"no pairs listed in {args.data}")
    model = LLCapsModel(model_cfg, seed=train_cfg.seed)
    log_path = args.log or Path(f"{args.out}.metrics.csv")

    def write_log(report):
        with open(log_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "psnr", "ssim"])
            for epoch, loss, p, s in report.rows():
                w.writerow([epoch, f"{loss:.8f}", f"{p:.6f}", f"{s:.6f}"])

    try:
        report = train_loop(model, train_pairs, train_cfg, test_pairs, checkpoint=str(args.out),
                            on_epoch=lambda _e, r: write_log(r))
    except TrainingDiverged as exc:
        write_log(exc.report)
        raise
    if not test_pairs:
        save_checkpoint(model, args.out)
    log.info("trained %d epochs; best test PSNR %.3f", len(report.epoch_loss), report.best_psnr)
    return 0


def cmd_enhance(args) -> int:
    model = load_checkpoint(args.ckpt)
    img = load_ppm(args.input)
    out = model.enhance(img, deterministic=args.deterministic, seed=args.seed)
    save_ppm(out, args.output)
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.ckpt)
    pairs = _pairs(args.data, args.split)
    if not pairs:
        raise ValueError(f"no pairs listed in {args.data}")
    rows = []
    for pair in pairs:
        out = model.enhance(pair.low, deterministic=args.deterministic, seed=args.seed)
        out = np.clip(out, 0.0, 1.0)
        rows.append((pair.name, psnr(out, pair.target), ssim(out, pair.target), *avg_gradient(out)))
    means = [float(np.mean([r[i] for r in rows])) for i in range(1, 5)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "psnr", "ssim", "ag_mean", "ag_var"])
        for name, *vals in rows + [("mean", *means)]:
            w.writerow([name, *(repr(float(v)) for v in vals)])
    print(f"{len(rows)} images  PSNR {means[0]:.3f} dB  SSIM {100 * means[1]:.2f}%  "
          f"AG {means[2]:.5f} / {means[3]:.3e}", file=sys.stderr)
    return 0


def cmd_ablate(args) -> int:
    model_cfg, train_cfg, _ = resolve_configs(args)
    train_pairs = load_pairs(args.data, "train") or load_pairs(args.data)
    test_pairs = load_pairs(args.data, "test")
    if not train_pairs:
        raise ValueError(f"no pairs listed in {args.data}")
    rows = ablation.run_ablation(train_pairs, test_pairs, model_cfg, train_cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ablation.CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())
    (args.out / "ablation.txt").write_text(ablation.format_table(rows))
    return 0


COMMANDS = {"degrade": cmd_degrade, "train": cmd_train, "enhance": cmd_enhance,
            "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "degrade":
        try:
            DegradeConfig(args.gamma_min, args.gamma_max, args.illum_min, args.illum_max, args.seed)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        return COMMANDS[args.command](args)
    except RUNTIME_ERRORS as exc:
        print(f"llcaps {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
