"""Multi-head attention adapted for two-cluster soft assignment.

The two hierarchical centroids are the queries and the pair features are keys
and values. Each head scores pairs with a sigmoid instead of a softmax, the
heads are averaged into a 2 x N assignment, and the centroids are read out of
the row-normalized assignment applied to the per-head values, recombined by an
output projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..engine import Value, as_value, concat
from .clustering import Centroids
from .state import FieldState, PairFeatures

_MASS_EPS = 1e-12


@dataclass
class AttentionParams:
    query: list[Value]
    key: list[Value]
    value: list[Value]
    out: Value

    @property
    def heads(self) -> int:
        return len(self.query)

    @property
    def head_dim(self) -> int:
        return self.query[0].shape[1]

    @property
    def dim(self) -> int:
        return self.query[0].shape[0]

    def parameters(self) -> list[Value]:
        return [*self.query, *self.key, *self.value, self.out]

    def validate(self, dim: int) -> None:
        if not self.query or not (len(self.query) == len(self.key) == len(self.value)):
            raise ValueError("attention params need the same non-zero number of query/key/value heads")
        d = self.head_dim
        if d < 1:
            raise ValueError("attention head dimension must be at least 1")
        for group, name in ((self.query, "query"), (self.key, "key"), (self.value, "value")):
            for h, w in enumerate(group):
                if w.shape != (dim, d):
                    raise ValueError(f"{name} projection of head {h} has shape {w.shape}, expected {(dim, d)}")
        if self.out.shape != (self.heads * d, dim):
            raise ValueError(f"output projection has shape {self.out.shape}, expected {(self.heads * d, dim)}")

    @classmethod
    def initialise(
        cls,
        dim: int,
        heads: int,
        head_dim: int,
        rng: np.random.Generator,
        *,
        requires_grad: bool = True,
    ) -> AttentionParams:
        def _w(rows: int, cols: int) -> Value:
            scale = 1.0 / math.sqrt(rows)
            return Value(rng.normal(0.0, scale, size=(rows, cols)), requires_grad=requires_grad)

        return cls(
            query=[_w(dim, head_dim) for _ in range(heads)],
            key=[_w(dim, head_dim) for _ in range(heads)],
            value=[_w(dim, head_dim) for _ in range(heads)],
            out=_w(heads * head_dim, dim),
        )

    @classmethod
    def identity(cls, dim: int) -> AttentionParams:
        eye = np.eye(dim)
        return cls(query=[Value(eye)], key=[Value(eye)], value=[Value(eye)], out=Value(eye))

    @classmethod
    def zeros(cls, dim: int, heads: int = 1, head_dim: int | None = None) -> AttentionParams:
        d = head_dim or dim

        def z(rows: int, cols: int) -> Value:
            return Value(np.zeros((rows, cols)))

        return cls(
            query=[z(dim, d) for _ in range(heads)],
            key=[z(dim, d) for _ in range(heads)],
            value=[z(dim, d) for _ in range(heads)],
            out=z(heads * d, dim),
        )


def attention_cluster(
    f: PairFeatures | Value | np.ndarray,
    init: Centroids,
    params: AttentionParams,
) -> FieldState:
    x = f.features if isinstance(f, PairFeatures) else as_value(f)
    if x.ndim != 2:
        raise ValueError(f"pair features must be N x C, got shape {x.shape}")
    params.validate(x.shape[1])

    queries = Value(np.stack([np.asarray(init[0]), np.asarray(init[1])]).astype(np.float64))
    scale = 1.0 / math.sqrt(params.head_dim)
    assign_heads: list[Value] = []
    values: list[Value] = []
    for wq, wk, wv in zip(params.query, params.key, params.value):
        q = queries @ wq
        k = x @ wk
        assign_heads.append(((q @ k.T) * scale).sigmoid())
        values.append(x @ wv)

    assign = assign_heads[0]
    for extra in assign_heads[1:]:
        assign = assign + extra
    assign = assign / float(len(assign_heads))

    weights = assign / (assign.sum(axis=1, keepdims=True) + _MASS_EPS)
    centroids = concat([weights @ v for v in values], axis=1) @ params.out

    mass = assign[0] + assign[1]
    return FieldState(
        c_s=centroids[0],
        c_l=centroids[1],
        a_s=assign[0] / mass,
        a_l=assign[1] / mass,
    )


__all__ = ["AttentionParams", "attention_cluster"]
