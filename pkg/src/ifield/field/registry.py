"""Summary-function variants and the per-group field evaluation used by training and inference."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from ..engine import Value
from .attention import AttentionParams, attention_cluster
from .clustering import Centroids, hier_init, soft_two_means
from .indicators import SummaryFn, interactiveness_score, modification_indicator, removal_indicator
from .state import FieldState

_MASS_EPS = 1e-12


@dataclass
class ProbeParams:
    """Per-pair fully connected scorer: A_s = sigmoid(f w + b)."""

    weight: Value
    bias: Value

    def parameters(self) -> list[Value]:
        return [self.weight, self.bias]

    @classmethod
    def initialise(cls, dim: int, rng: np.random.Generator, *, requires_grad: bool = True) -> ProbeParams:
        weight = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(dim, 1))
        return cls(Value(weight, requires_grad=requires_grad), Value(np.zeros(1), requires_grad=requires_grad))


def fc_probe(x: Value, params: ProbeParams) -> FieldState:
    n = x.shape[0]
    a_s = (x @ params.weight + params.bias)[:, 0].sigmoid()
    a_l = 1.0 - a_s
    c_s = (a_s.reshape(n, 1) * x).sum(axis=0) / (a_s.sum() + _MASS_EPS)
    c_l = (a_l.reshape(n, 1) * x).sum(axis=0) / (a_l.sum() + _MASS_EPS)
    return FieldState(c_s=c_s, c_l=c_l, a_s=a_s, a_l=a_l)


@dataclass
class FieldParams:
    attention: AttentionParams | None = None
    probe: ProbeParams | None = None

    def parameters(self) -> list[Value]:
        params: list[Value] = []
        if self.attention is not None:
            params.extend(self.attention.parameters())
        if self.probe is not None:
            params.extend(self.probe.parameters())
        return params


@dataclass(frozen=True)
class ClusterSettings:
    iters: int = 20
    tol: float = 1e-6


SummaryBuilder = Callable[[Centroids, FieldParams, ClusterSettings], SummaryFn]


def _clustering(init: Centroids, params: FieldParams, settings: ClusterSettings) -> SummaryFn:
    return lambda x: soft_two_means(x, init, iters=settings.iters, tol=settings.tol)


def _attention(init: Centroids, params: FieldParams, settings: ClusterSettings) -> SummaryFn:
    if params.attention is None:
        raise ValueError("the attention summary needs attention parameters")
    return lambda x: attention_cluster(x, init, params.attention)


def _fc(init: Centroids, params: FieldParams, settings: ClusterSettings) -> SummaryFn:
    if params.probe is None:
        raise ValueError("the fc summary needs probe parameters")
    return lambda x: fc_probe(x, params.probe)


SUMMARY_REGISTRY: Dict[str, SummaryBuilder] = {
    "clustering": _clustering,
    "attention": _attention,
    "fc": _fc,
}


@dataclass
class FieldOutput:
    state: FieldState
    d_r: Value
    d_m: Value
    degenerate: bool = False

    @property
    def interactive(self) -> Value:
        """Assignment of the minority cluster (the inference-time interactive cluster)."""
        if self.degenerate:
            return self.state.a_s
        return self.state.interactive_assignment()

    def scores(self) -> np.ndarray:
        return interactiveness_score(self.interactive.data, self.d_r.data, self.d_m.data)


def _degenerate(x: Value) -> FieldOutput:
    n = x.shape[0]
    centre = x.data.mean(axis=0)
    half = Value(np.full(n, 0.5))
    state = FieldState(c_s=Value(centre), c_l=Value(centre.copy()), a_s=half, a_l=Value(np.full(n, 0.5)))
    return FieldOutput(state=state, d_r=Value(np.zeros(n)), d_m=Value(np.zeros(n)), degenerate=True)


def run_field(
    x: Value,
    variant: str,
    params: FieldParams,
    settings: ClusterSettings = ClusterSettings(),
    *,
    indicators: bool = True,
) -> FieldOutput:
    """Model one group's field: summary, assignments and both change indicators."""
    try:
        builder = SUMMARY_REGISTRY[variant]
    except KeyError as exc:
        raise ValueError(f"unknown field variant '{variant}'") from exc
    if x.shape[0] == 1:
        return _degenerate(x)
    g = builder(hier_init(x.data), params, settings)
    state = g(x)
    if not indicators:
        n = x.shape[0]
        return FieldOutput(state=state, d_r=Value(np.zeros(n)), d_m=Value(np.zeros(n)))
    d_r = removal_indicator(x, g, reference=state)
    d_m = modification_indicator(x, g, reference=state)
    return FieldOutput(state=state, d_r=d_r, d_m=d_m)


__all__ = [
    "ClusterSettings",
    "FieldOutput",
    "FieldParams",
    "ProbeParams",
    "SUMMARY_REGISTRY",
    "fc_probe",
    "run_field",
]
