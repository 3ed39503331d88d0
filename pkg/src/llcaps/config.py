"""Flat ``key=value`` text for every config dataclass.

Keys are ``section.field``: ``model.*``, ``cwa.*``, ``diffusion.*``,
``train.*`` and ``degrade.*``. Blank lines and ``#`` comments are ignored.
The same text is embedded in checkpoints.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import fields, replace

from .attention import CWAConfig
from .data import DegradeConfig
from .diffusion import DiffusionConfig
from .network import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, hint):
    text = text.strip()
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if text.lower() == "none":
            return None
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if hint is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if hint is int:
        return int(text)
    if hint is float:
        return float(text)
    return text


def _flat_fields(obj, section: str) -> list:
    return [(f"{section}.{f.name}", getattr(obj, f.name)) for f in fields(obj)
            if not dataclasses.is_dataclass(getattr(obj, f.name))]


def dump_config(model: ModelConfig | None = None, train: TrainConfig | None = None,
                degrade: DegradeConfig | None = None) -> str:
    lines = []
    if model is not None:
        lines += _flat_fields(model, "model")
        lines += [(k, v) for k, v in _flat_fields(model.cwa, "cwa") if k not in ("cwa.channels", "cwa.zero_init")]
        lines += _flat_fields(model.diffusion, "diffusion")
    if train is not None:
        lines += _flat_fields(train, "train")
    if degrade is not None:
        lines += _flat_fields(degrade, "degrade")
    return "".join(f"{k}={_format(v)}\n" for k, v in lines)


def parse_pairs(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _apply(obj, section: str, pairs: dict, used: set):
    hints = typing.get_type_hints(type(obj))
    changes = {}
    for f in fields(obj):
        key = f"{section}.{f.name}"
        if key in pairs:
            try:
                changes[f.name] = _parse(pairs[key], hints[f.name])
            except (ValueError, StopIteration) as exc:
                raise ConfigError(f"{key}: {exc}") from None
            used.add(key)
    try:
        return replace(obj, **changes) if changes else obj
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}") from None


def load_config(text: str, model: ModelConfig | None = None, train: TrainConfig | None = None,
                degrade: DegradeConfig | None = None) -> tuple:
    """Parse ``text`` over the given (or default) configs; unknown keys are an error."""
    pairs = parse_pairs(text)
    used: set = set()
    model = model or ModelConfig()
    cwa = _apply(model.cwa, "cwa", pairs, used)
    diffusion = _apply(model.diffusion, "diffusion", pairs, used)
    model = _apply(replace(model, cwa=cwa, diffusion=diffusion), "model", pairs, used)
    train = _apply(train or TrainConfig(), "train", pairs, used)
    degrade = _apply(degrade or DegradeConfig(), "degrade", pairs, used)
    unknown = sorted(set(pairs) - used)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return model, train, degrade
