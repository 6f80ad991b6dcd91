"""Versioned JSON checkpoints of every parameter array with its shape."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from .. import __version__
from ..config import RunConfig, build_config
from ..errors import CheckpointError, ConfigError
from .model import ModelParams, ModelSpec
from .trainer import EpochRecord

FORMAT = "ifield-checkpoint"
FORMAT_VERSION = 1


class ArrayRecord(BaseModel):
    shape: list[int]
    data: list[float]

    @classmethod
    def of(cls, arr: np.ndarray) -> ArrayRecord:
        return cls(shape=list(arr.shape), data=[float(x) for x in arr.reshape(-1)])

    def to_array(self) -> np.ndarray:
        arr = np.asarray(self.data, dtype=np.float64)
        expected = int(np.prod(self.shape)) if self.shape else 1
        if arr.size != expected:
            raise ValueError(f"array holds {arr.size} values, shape {self.shape} needs {expected}")
        return arr.reshape(self.shape)


class CheckpointFile(BaseModel):
    format: str
    version: int
    tool_version: str
    stage: int
    spec: ModelSpec
    config: dict[str, Any]
    arrays: dict[str, ArrayRecord]
    history: list[dict[str, Any]] = []


def _history_entry(record: EpochRecord | dict[str, Any]) -> dict[str, Any]:
    entry = record.model_dump() if isinstance(record, BaseModel) else dict(record)
    entry.pop("wall_time", None)
    return entry


def save_checkpoint(path: str | Path, params: ModelParams, cfg: RunConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = CheckpointFile(
        format=FORMAT,
        version=FORMAT_VERSION,
        tool_version=__version__,
        stage=params.stage,
        spec=params.spec,
        config=cfg.model_dump(mode="json"),
        arrays={name: ArrayRecord.of(arr) for name, arr in params.arrays.items()},
        history=[_history_entry(r) for r in params.history],
    )
    path.write_text(json.dumps(payload.model_dump(mode="json"), sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> tuple[ModelParams, RunConfig]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path} is not a checkpoint: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not an ifield checkpoint")
    if raw.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint format version {raw.get('version')}, this build reads version {FORMAT_VERSION}"
        )
    try:
        ckpt = CheckpointFile.model_validate(raw)
        arrays = {name: rec.to_array() for name, rec in ckpt.arrays.items()}
        cfg = build_config(ckpt.config)
        history = [EpochRecord.model_validate(h) for h in ckpt.history]
    except (ValidationError, ValueError, ConfigError) as exc:
        raise CheckpointError(f"{path} is corrupt: {exc}") from exc
    return ModelParams(ckpt.spec, arrays, stage=ckpt.stage, history=history), cfg


__all__ = ["FORMAT", "FORMAT_VERSION", "load_checkpoint", "save_checkpoint"]
