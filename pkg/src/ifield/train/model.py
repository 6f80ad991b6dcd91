"""Pair encoder with box, class and verb heads plus the field parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import expit, softmax

from ..engine import Value
from ..field import AttentionParams, FieldParams, ProbeParams

BOX_STEP = 0.1
ENCODER_LAYERS = 3

STAGE_PREFIXES: dict[int, tuple[str, ...]] = {
    1: ("encoder.", "box_head.", "class_head."),
    2: ("encoder.", "box_head.", "class_head.", "field."),
    3: ("encoder.", "box_head.", "class_head.", "field.", "verb_head."),
}


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    input_dim: int
    hidden: int = 64
    feature_dim: int = 16
    num_classes: int
    num_verbs: int
    variant: str = "attention"
    field_mode: str = "full"
    heads: int = 2
    head_dim: int = 8
    feature_mode: str = "geometric"


@dataclass
class ModelParams:
    """Named parameter arrays; differentiable leaves are created per forward pass."""

    spec: ModelSpec
    arrays: dict[str, np.ndarray]
    stage: int = 0
    history: list = field(default_factory=list)

    def names(self) -> list[str]:
        return list(self.arrays)

    def trainable(self, stage: int) -> list[str]:
        prefixes = STAGE_PREFIXES[stage]
        return [n for n in self.arrays if n.startswith(prefixes)]

    def leaves(self, trainable: Iterable[str] = ()) -> dict[str, Value]:
        wanted = set(trainable)
        return {name: Value(arr, requires_grad=name in wanted, name=name) for name, arr in self.arrays.items()}

    def copy(self) -> ModelParams:
        return ModelParams(self.spec, {k: v.copy() for k, v in self.arrays.items()}, self.stage, list(self.history))

    def all_finite(self) -> str | None:
        """Name of the first non-finite parameter, if any."""
        for name, arr in self.arrays.items():
            if not np.all(np.isfinite(arr)):
                return name
        return None


def _dense(rng: np.random.Generator, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(0.0, 1.0 / math.sqrt(rows), size=(rows, cols)), np.zeros(cols)


def init_params(spec: ModelSpec, rng: np.random.Generator) -> ModelParams:
    arrays: dict[str, np.ndarray] = {}
    widths = [spec.input_dim, spec.hidden, spec.hidden, spec.feature_dim]
    for layer in range(ENCODER_LAYERS):
        arrays[f"encoder.{layer}.weight"], arrays[f"encoder.{layer}.bias"] = _dense(rng, widths[layer], widths[layer + 1])
    arrays["box_head.weight"], arrays["box_head.bias"] = _dense(rng, spec.feature_dim, 8)
    arrays["class_head.weight"], arrays["class_head.bias"] = _dense(rng, spec.feature_dim, spec.num_classes + 1)
    arrays["verb_head.weight"], arrays["verb_head.bias"] = _dense(rng, spec.feature_dim, spec.num_verbs)

    if spec.variant == "attention":
        attn = AttentionParams.initialise(spec.feature_dim, spec.heads, spec.head_dim, rng, requires_grad=False)
        for kind in ("query", "key", "value"):
            for h, w in enumerate(getattr(attn, kind)):
                arrays[f"field.{kind}.{h}"] = w.data
        arrays["field.out"] = attn.out.data
    elif spec.variant == "fc":
        probe = ProbeParams.initialise(spec.feature_dim, rng, requires_grad=False)
        arrays["field.probe.weight"] = probe.weight.data
        arrays["field.probe.bias"] = probe.bias.data
    return ModelParams(spec, arrays)


def field_params(leaves: dict[str, Value], spec: ModelSpec) -> FieldParams:
    if spec.variant == "attention":
        heads = range(spec.heads)
        return FieldParams(
            attention=AttentionParams(
                query=[leaves[f"field.query.{h}"] for h in heads],
                key=[leaves[f"field.key.{h}"] for h in heads],
                value=[leaves[f"field.value.{h}"] for h in heads],
                out=leaves["field.out"],
            )
        )
    if spec.variant == "fc":
        return FieldParams(probe=ProbeParams(leaves["field.probe.weight"], leaves["field.probe.bias"]))
    return FieldParams()


@dataclass
class ModelOutput:
    features: Value
    human_boxes: Value
    object_boxes: Value
    class_logits: Value
    verb_logits: Value

    def class_probs(self) -> np.ndarray:
        return softmax(self.class_logits.data, axis=1)

    def verb_scores(self) -> np.ndarray:
        return expit(self.verb_logits.data)


def _linear(x: Value, leaves: dict[str, Value], prefix: str) -> Value:
    return x @ leaves[f"{prefix}.weight"] + leaves[f"{prefix}.bias"]


def encode(leaves: dict[str, Value], inputs: np.ndarray) -> Value:
    x = Value(np.asarray(inputs, dtype=np.float64))
    for layer in range(ENCODER_LAYERS - 1):
        x = _linear(x, leaves, f"encoder.{layer}").tanh()
    return _linear(x, leaves, f"encoder.{ENCODER_LAYERS - 1}")


def forward(leaves: dict[str, Value], inputs: np.ndarray, human_boxes: np.ndarray, object_boxes: np.ndarray) -> ModelOutput:
    """Encode candidate descriptors; box heads refine the detections by bounded residuals."""
    f = encode(leaves, inputs)
    delta = _linear(f, leaves, "box_head").tanh() * BOX_STEP
    human = Value(np.asarray(human_boxes, dtype=np.float64)) + delta[:, 0:4]
    obj = Value(np.asarray(object_boxes, dtype=np.float64)) + delta[:, 4:8]
    return ModelOutput(
        features=f,
        human_boxes=human,
        object_boxes=obj,
        class_logits=_linear(f, leaves, "class_head"),
        verb_logits=_linear(f, leaves, "verb_head"),
    )


__all__ = [
    "BOX_STEP",
    "ModelOutput",
    "ModelParams",
    "ModelSpec",
    "STAGE_PREFIXES",
    "encode",
    "field_params",
    "forward",
    "init_params",
]
