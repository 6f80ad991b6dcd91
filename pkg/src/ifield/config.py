"""Run configuration: a tree of pydantic models read from TOML or JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Literal, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .losses import FieldMode, LossWeights

REGIMES: tuple[str, str, str] = ("minority", "balanced", "majority")

# interactive-ratio statistics (minority / balanced / majority) of public HOI datasets
MIXTURE_PRESETS: dict[str, tuple[float, float, float]] = {
    "hico-det": (0.791, 0.073, 0.136),
    "v-coco": (0.760, 0.079, 0.161),
    "ambiguous-hoi": (0.801, 0.062, 0.137),
    "ava": (0.732, 0.084, 0.184),
}

BALANCED_BAND = (0.4, 0.6)


def regime_of(ratio: float) -> str:
    lo, hi = BALANCED_BAND
    if ratio < lo:
        return "minority"
    if ratio > hi:
        return "majority"
    return "balanced"


def feasible_counts(regime: str, humans: int) -> list[int]:
    """Interactive counts k >= 1 out of ``humans`` candidates whose ratio falls in ``regime``."""
    return [k for k in range(1, humans + 1) if regime_of(k / humans) == regime]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeneratorConfig(_Strict):
    mixture: tuple[float, float, float] = MIXTURE_PRESETS["hico-det"]
    humans: tuple[int, int] = (2, 8)
    objects: tuple[int, int] = (1, 4)
    feature_dim: int = Field(default=16, ge=2)
    separation: float = Field(default=6.0, gt=0.0)
    feature_std: float = Field(default=2.0, gt=0.0)
    verbs: int = Field(default=4, ge=1)
    object_classes: int = Field(default=3, ge=1)
    feature_mode: Literal["oracle", "geometric"] = "geometric"
    box_jitter: float = Field(default=0.01, ge=0.0, le=0.1)
    seed: int = Field(default=0, ge=0)

    @field_validator("mixture", mode="before")
    @classmethod
    def _preset(cls, value: Any) -> Any:
        if isinstance(value, str):
            try:
                return MIXTURE_PRESETS[value.lower()]
            except KeyError:
                known = ", ".join(sorted(MIXTURE_PRESETS))
                raise ValueError(f"unknown mixture preset '{value}' (known: {known})") from None
        return value

    @field_validator("mixture")
    @classmethod
    def _normalised(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(w < 0 for w in value):
            raise ValueError("mixture weights must be nonnegative")
        if not math.isclose(math.fsum(value), 1.0, abs_tol=1e-9):
            raise ValueError(f"mixture weights must sum to 1, got {math.fsum(value):.6g}")
        return value

    @field_validator("humans", "objects")
    @classmethod
    def _range(cls, value: tuple[int, int]) -> tuple[int, int]:
        lo, hi = value
        if lo < 1 or hi < lo:
            raise ValueError(f"expected 1 <= min <= max, got {value}")
        return value

    @model_validator(mode="after")
    def _regimes_feasible(self) -> GeneratorConfig:
        lo, hi = self.humans
        for regime, weight in zip(REGIMES, self.mixture):
            if weight > 0 and not any(feasible_counts(regime, h) for h in range(lo, hi + 1)):
                raise ValueError(f"regime '{regime}' cannot be realized with {lo}-{hi} humans per scene")
        return self

    def weights(self) -> dict[str, float]:
        return dict(zip(REGIMES, self.mixture))


class FieldConfig(_Strict):
    variant: Literal["attention", "clustering", "fc"] = "attention"
    mode: FieldMode = "full"
    heads: int = Field(default=2, ge=1)
    head_dim: int = Field(default=8, ge=1)
    iters: int = Field(default=20, ge=1)
    tol: float = Field(default=1e-6, ge=0.0)


class StageEpochs(_Strict):
    stage1: int = Field(default=30, ge=0)
    stage2: int = Field(default=9, ge=0)
    stage3: int = Field(default=15, ge=0)

    def of(self, stage: int) -> int:
        return (self.stage1, self.stage2, self.stage3)[stage - 1]


class TrainConfig(_Strict):
    epochs: StageEpochs = Field(default_factory=StageEpochs)
    stages: tuple[int, ...] = (1, 2, 3)
    lr: float = Field(default=1e-3, gt=0.0)
    lr_decay: float = Field(default=0.1, gt=0.0, le=1.0)
    decay_epoch: Optional[int] = Field(default=20, ge=1)
    batch_size: int = Field(default=8, ge=1)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = Field(default=1e-8, gt=0.0)
    hidden: int = Field(default=64, ge=1)
    feature_dim: int = Field(default=16, ge=2)
    seed: int = Field(default=0, ge=0)

    @field_validator("stages")
    @classmethod
    def _stages(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(s not in (1, 2, 3) for s in value):
            raise ValueError("stages must be a non-empty subset of 1, 2, 3")
        return tuple(sorted(set(value)))

    @field_validator("betas")
    @classmethod
    def _betas(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError("betas must lie in [0, 1)")
        return value


class EvalOptions(_Strict):
    iou_thr: float = Field(default=0.5, gt=0.0, lt=1.0)
    nms_thr: float = Field(default=0.6, gt=0.0, lt=1.0)
    topk: tuple[int, ...] = (5, 10)
    class_aware: bool = True
    use_sb: bool = True

    @field_validator("topk")
    @classmethod
    def _topk(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(k < 1 for k in value):
            raise ValueError("top-k values must be at least 1")
        return tuple(sorted(set(value)))


class RunConfig(_Strict):
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    field: FieldConfig = Field(default_factory=FieldConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    losses: LossWeights = Field(default_factory=LossWeights)
    eval: EvalOptions = Field(default_factory=EvalOptions)
    seed: Optional[int] = Field(default=None, ge=0)
    out_dir: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _propagate_seed(cls, data: Any) -> Any:
        """A top-level ``seed`` seeds both the generator and the trainer unless they set their own."""
        if isinstance(data, dict) and data.get("seed") is not None:
            data = dict(data)
            for section in ("generator", "train"):
                block = dict(data.get(section) or {})
                block.setdefault("seed", data["seed"])
                data[section] = block
        return data


def _dotted(loc: tuple[Any, ...]) -> str:
    parts = [str(p) for p in loc if not isinstance(p, int)]
    return ".".join(parts) or "<root>"


def _error_from(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    message = str(first.get("msg", "invalid value"))
    if message.startswith("Value error, "):
        message = message[len("Value error, ") :]
    return ConfigError(_dotted(tuple(first.get("loc", ()))), message)


def _deep_merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a table of settings")
    return data


def build_config(data: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Validate raw settings (plus command-line overrides) into a ``RunConfig``."""
    merged = _deep_merge(data or {}, overrides or {})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise _error_from(exc) from exc


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    data = read_config_file(path) if path is not None else {}
    return build_config(data, overrides)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


__all__ = [
    "BALANCED_BAND",
    "EvalOptions",
    "FieldConfig",
    "GeneratorConfig",
    "MIXTURE_PRESETS",
    "REGIMES",
    "RunConfig",
    "StageEpochs",
    "TrainConfig",
    "build_config",
    "dump_config",
    "feasible_counts",
    "load_config",
    "read_config_file",
    "regime_of",
]
