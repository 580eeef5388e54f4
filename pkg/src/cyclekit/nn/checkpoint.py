"""Versioned ``.npz`` checkpoints: named float64 tensors, config and seed."""

from __future__ import annotations

import json

import numpy as np

from .._io import save_npz
from .params import ModelConfig

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str, config: ModelConfig, params: dict, seed: int,
                    extra: dict | None = None) -> None:
    arrays = {
        "format_version": np.array(FORMAT_VERSION),
        "config": np.array(config.to_json()),
        "seed": np.array(int(seed)),
        "extra": np.array(json.dumps(extra or {}, sort_keys=True)),
    }
    for name, value in params.items():
        arrays[f"param/{name}"] = np.ascontiguousarray(value, dtype=np.float64)
    save_npz(path, arrays)


def load_checkpoint(path: str):
    """Returns ``(config, params, seed, extra)``."""
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a readable checkpoint ({exc})") from exc
    with z:
        if "format_version" not in z.files:
            raise CheckpointError(f"{path}: missing format version")
        version = int(z["format_version"])
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: format version {version} unsupported")
        config = ModelConfig.from_json(str(z["config"]))
        params = {n[len("param/"):]: z[n].copy() for n in z.files if n.startswith("param/")}
        return config, params, int(z["seed"]), json.loads(str(z["extra"]))
