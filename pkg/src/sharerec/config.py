"""Run configuration: ``key = value`` files, precedence resolution and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import platform
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .trainer import ConfigError, TrainConfig

# keys that are not TrainConfig fields but may appear in a config file
DATA_KEYS = {
    "interactions": str, "social": str, "threshold": float, "header": bool,
    "split": "floats", "out": str, "bins": int, "targets": "floats",
    "users": "ints", "seeds": "ints", "datasets": "strs", "methods": "strs",
    "zeta_grid": "floats", "lambda_grid": "floats", "parallel_cells": int,
    "checkpoint": str, "rewired": str, "avg_degree": float,
}

# flag spellings that differ from the field they set
ALIASES = {"lambda": "lam", "batch": "batch_size", "l2": "weight_decay", "warmup": "warmup_epoch",
           "ablation": "ablations"}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _split_list(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def _train_kinds() -> dict[str, object]:
    kinds = {}
    for f in fields(TrainConfig):
        default = f.default
        if f.name == "ablations":
            kinds[f.name] = "strs"
        elif f.name == "candidate_cap":
            kinds[f.name] = "optint"
        else:
            kinds[f.name] = type(default)
    return kinds


def coerce(key: str, raw):
    """Convert a raw string (or already-typed value) for ``key``."""
    kinds = {**_train_kinds(), **DATA_KEYS}
    if key not in kinds:
        raise ConfigError(f"unknown config key {key!r}")
    kind = kinds[key]
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    try:
        if kind is bool:
            return _parse_bool(raw)
        if kind == "optint":
            return None if raw.strip().lower() in ("", "none") else int(raw)
        if kind == "floats":
            return tuple(float(x) for x in _split_list(raw))
        if kind == "ints":
            return tuple(int(x) for x in _split_list(raw))
        if kind == "strs":
            return tuple(_split_list(raw))
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        out[key] = coerce(key, raw)
    return out


def load_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))


@dataclass
class RunConfig:
    command: str
    train: TrainConfig
    options: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.options.get(key, default)

    def to_dict(self) -> dict:
        opts = {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.options.items())}
        return {"command": self.command, "train": self.train.to_dict(), "options": opts}


def resolve(command: str, defaults: dict, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge default < config file < flag; ``None`` flags mean 'not given'."""
    merged = dict(defaults)
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    train_keys = set(TrainConfig.field_names())
    train = TrainConfig(**{k: v for k, v in merged.items() if k in train_keys})
    opts = {k: v for k, v in merged.items() if k not in train_keys}
    return RunConfig(command, train, opts)


def git_blob_hash(path) -> str:
    """Content hash in git's blob form (sha1 of 'blob <size>\\0' + bytes)."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(f"blob {len(data)}\0".encode())
    h.update(data)
    return h.hexdigest()


def write_manifest(run: RunConfig, out_dir, inputs=(), extra: dict | None = None) -> Path:
    """Record everything needed to re-run: resolved config, seed, input hashes and versions.

    No timestamps, so repeating a run also repeats its manifest.
    """
    hashes = {}
    for p in inputs:
        if p and os.path.exists(p):
            hashes[str(p)] = git_blob_hash(p)
    doc = {
        "config": run.to_dict(),
        "seed": run.train.seed,
        "inputs": hashes,
        "versions": {"sharerec": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "kernels": kernels.BACKEND},
    }
    if extra:
        doc.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
