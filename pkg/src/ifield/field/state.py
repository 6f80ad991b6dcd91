from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable

import numpy as np

from ..engine import Value, as_value, concat


@dataclass
class PairFeatures:
    """Feature rows of the candidate pairs sharing one field."""

    features: Value
    group_key: Hashable = None

    def __post_init__(self) -> None:
        self.features = as_value(self.features)
        data = self.features.data
        if data.ndim != 2:
            raise ValueError(f"pair features must be N x C, got shape {data.shape}")
        n, c = data.shape
        if n < 1:
            raise ValueError("a field needs at least one pair")
        if c < 2:
            raise ValueError(f"pair features need at least 2 columns, got {c}")
        if not np.all(np.isfinite(data)):
            raise ValueError("pair features contain non-finite values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class FieldState:
    c_s: Value
    c_l: Value
    a_s: Value
    a_l: Value

    @property
    def summary(self) -> Value:
        return concat([self.c_s, self.c_l], axis=0)

    @property
    def n(self) -> int:
        return self.a_s.shape[0]

    def minority_is_small(self) -> bool:
        """True when the P_S cluster carries no more mass than P_L."""
        return float(self.a_s.data.sum()) <= float(self.a_l.data.sum())

    def interactive_assignment(self) -> Value:
        """Assignment of the minority cluster, which inference treats as interactive."""
        return self.a_s if self.minority_is_small() else self.a_l


def energy(state: FieldState, i: int) -> float:
    n = state.n
    if not -n <= i < n:
        raise IndexError(f"pair index {i} out of range for a field of {n} pairs")
    return float(state.a_s.data[i])


__all__ = ["PairFeatures", "FieldState", "energy"]
