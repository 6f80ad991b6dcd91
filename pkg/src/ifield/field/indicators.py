"""Field-change indicators and the inference-time interactiveness score."""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
from scipy.special import expit

from ..engine import Value, as_value, concat, stack
from ..errors import DegenerateFieldWarning
from .state import FieldState, PairFeatures

SummaryFn = Callable[[Value], FieldState]


def _features(f: PairFeatures | Value | np.ndarray) -> Value:
    return f.features if isinstance(f, PairFeatures) else as_value(f)


def summary_distance(reference: FieldState, perturbed: FieldState) -> Value:
    """L2 distance between two field summaries after centroid correspondence.

    Perturbed centroids are matched to the reference ones by total Euclidean
    distance; ties keep the (s, l) order.
    """
    ref_s, ref_l = reference.c_s, reference.c_l
    p_s, p_l = perturbed.c_s, perturbed.c_l
    straight = np.linalg.norm(ref_s.data - p_s.data) + np.linalg.norm(ref_l.data - p_l.data)
    swapped = np.linalg.norm(ref_s.data - p_l.data) + np.linalg.norm(ref_l.data - p_s.data)
    if swapped < straight:
        p_s, p_l = p_l, p_s
    return concat([ref_s - p_s, ref_l - p_l], axis=0).norm()


def removal_indicator(
    f: PairFeatures | Value | np.ndarray,
    g: SummaryFn,
    reference: FieldState | None = None,
) -> Value:
    """D_r: summary displacement when each pair is left out of the field."""
    x = _features(f)
    n = x.shape[0]
    if n < 3:
        warnings.warn(
            f"removal indicator needs at least 3 pairs, got {n}; using zeros",
            DegenerateFieldWarning,
            stacklevel=2,
        )
        return Value(np.zeros(n))
    full = reference if reference is not None else g(x)
    distances = []
    for i in range(n):
        keep = np.array([j for j in range(n) if j != i])
        distances.append(summary_distance(full, g(x[keep])))
    return stack(distances)


def modification_indicator(
    f: PairFeatures | Value | np.ndarray,
    g: SummaryFn,
    reference: FieldState | None = None,
) -> Value:
    """D_m: summary displacement when each pair is replaced by the mean pair."""
    x = _features(f)
    n = x.shape[0]
    if n < 2:
        return Value(np.zeros(n))
    full = reference if reference is not None else g(x)
    mean = x.mean(axis=0, keepdims=True)
    distances = []
    for i in range(n):
        mask = np.zeros((n, 1))
        mask[i, 0] = 1.0
        replaced = x * (1.0 - mask) + mean * mask
        distances.append(summary_distance(full, g(replaced)))
    return stack(distances)


def interactiveness_score(a_s, d_r, d_m) -> np.ndarray:
    """S_b = (A_s + sigmoid(D_r) + sigmoid(D_m) - 1) / 2, elementwise."""
    a_s = np.asarray(a_s.data if isinstance(a_s, Value) else a_s, dtype=np.float64)
    d_r = np.asarray(d_r.data if isinstance(d_r, Value) else d_r, dtype=np.float64)
    d_m = np.asarray(d_m.data if isinstance(d_m, Value) else d_m, dtype=np.float64)
    if not (a_s.shape == d_r.shape == d_m.shape):
        raise ValueError(f"shape mismatch: A_s {a_s.shape}, D_r {d_r.shape}, D_m {d_m.shape}")
    if np.any(d_r < 0) or np.any(d_m < 0):
        raise ValueError("difference indicators must be nonnegative")
    return (a_s + (expit(d_r) + expit(d_m) - 1.0)) / 2.0


__all__ = [
    "SummaryFn",
    "summary_distance",
    "removal_indicator",
    "modification_indicator",
    "interactiveness_score",
]
