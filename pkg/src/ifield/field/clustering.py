"""Hierarchical initialisation and soft two-means clustering of pair features."""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage

from ..engine import Value, as_value, stack
from .state import FieldState, PairFeatures

Centroids = tuple[np.ndarray, np.ndarray]

_MASS_EPS = 1e-12


def hier_init(f: PairFeatures | np.ndarray) -> Centroids:
    """Average-linkage agglomerative split into two clusters.

    Returns the cluster means with the smaller cluster first; equal sizes put the
    cluster holding the lowest row index first.
    """
    x = f.features.data if isinstance(f, PairFeatures) else np.asarray(f, dtype=np.float64)
    n = x.shape[0]
    if n == 1:
        return x[0].copy(), x[0].copy()
    if n == 2:
        return x[0].copy(), x[1].copy()
    tree = linkage(x, method="average", metric="euclidean")
    labels = cut_tree(tree, n_clusters=2).reshape(-1)
    clusters = [np.flatnonzero(labels == k) for k in np.unique(labels)]
    if len(clusters) == 1:
        centre = x.mean(axis=0)
        return centre, centre.copy()
    clusters.sort(key=lambda idx: (idx.size, idx[0]))
    return x[clusters[0]].mean(axis=0), x[clusters[1]].mean(axis=0)


def soft_assign(x: Value, c_s: Value, c_l: Value) -> tuple[Value, Value]:
    """Per-pair two-way softmax over the negative Euclidean centroid distances."""
    d_s = (x - c_s).norm(axis=1)
    d_l = (x - c_l).norm(axis=1)
    assign = stack([-d_s, -d_l], axis=1).softmax(axis=1)
    return assign[:, 0], assign[:, 1]


def _weighted_mean(x: Value, weights: Value) -> Value:
    n = x.shape[0]
    return (weights.reshape(n, 1) * x).sum(axis=0) / (weights.sum() + _MASS_EPS)


def soft_two_means(
    f: PairFeatures | Value | np.ndarray,
    init: Centroids,
    iters: int = 20,
    tol: float = 1e-6,
) -> FieldState:
    if iters < 1:
        raise ValueError("soft two-means needs at least one iteration")
    x = f.features if isinstance(f, PairFeatures) else as_value(f)
    c_s, c_l = Value(np.asarray(init[0], dtype=np.float64)), Value(np.asarray(init[1], dtype=np.float64))
    for _ in range(iters):
        a_s, a_l = soft_assign(x, c_s, c_l)
        new_s, new_l = _weighted_mean(x, a_s), _weighted_mean(x, a_l)
        moved = max(
            float(np.linalg.norm(new_s.data - c_s.data)),
            float(np.linalg.norm(new_l.data - c_l.data)),
        )
        c_s, c_l = new_s, new_l
        if moved < tol:
            break
    a_s, a_l = soft_assign(x, c_s, c_l)
    return FieldState(c_s=c_s, c_l=c_l, a_s=a_s, a_l=a_l)


__all__ = ["Centroids", "hier_init", "soft_assign", "soft_two_means"]
