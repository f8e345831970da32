"""JSON checkpoints: model spec, input standardization, every parameter tensor and the Adam state.

Floats are written with ``repr`` precision, so save/load round-trips bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .model import Model, ModelSpec

FORMAT_VERSION = 1


def _tensor(name: str, arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}


def _array(entry: dict, name: str) -> np.ndarray:
    data = np.asarray(entry["data"], dtype=np.float64)
    shape = tuple(entry["shape"])
    if data.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"{name}: {data.size} values for shape {shape}")
    return data.reshape(shape)


def checkpoint_dict(model: Model, adam_t: int = 0, meta: dict | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_spec": model.spec.to_dict(),
        "adam_t": int(adam_t),
        "params": [
            {
                "name": p.name,
                "group": p.group,
                "value": _tensor(p.name, p.value),
                "adam_m": _tensor(p.name, p.adam_m),
                "adam_v": _tensor(p.name, p.adam_v),
            }
            for p in model.params
        ],
        "input_shift": _tensor("input_shift", model.input_shift),
        "input_scale": _tensor("input_scale", model.input_scale),
        "meta": meta or {},
    }


def model_from_dict(d: dict) -> tuple[Model, int, dict]:
    if d.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {d.get('format_version')!r}")
    try:
        spec = ModelSpec.from_dict(d["model_spec"])
        model = Model(spec, rng=0)
        named = model.named_params()
        stored = {e["name"]: e for e in d["params"]}
        if set(stored) != set(named):
            raise CheckpointError(f"parameter names differ: {sorted(set(stored) ^ set(named))}")
        for name, p in named.items():
            e = stored[name]
            for attr in ("value", "adam_m", "adam_v"):
                arr = _array(e[attr], f"{name}.{attr}")
                if arr.shape != p.shape:
                    raise CheckpointError(f"{name}.{attr}: shape {arr.shape} != {p.shape}")
                getattr(p, attr)[...] = arr
        for attr in ("input_shift", "input_scale"):
            arr = _array(d[attr], attr)
            if arr.shape != (spec.feature_dim,):
                raise CheckpointError(f"{attr}: shape {arr.shape} != ({spec.feature_dim},)")
            setattr(model, attr, arr)
        return model, int(d["adam_t"]), dict(d.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint: {exc!r}") from None


def save_checkpoint(model: Model, path, adam_t: int = 0, meta: dict | None = None) -> None:
    text = json.dumps(checkpoint_dict(model, adam_t, meta), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[Model, int, dict]:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return model_from_dict(d)
