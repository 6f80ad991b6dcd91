"""Set-based ground-truth assignment for pair predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .field.grouping import FieldGroup
from .geometry import giou_array
from .losses import LossWeights, PairTargets

if TYPE_CHECKING:  # pragma: no cover - import only for type checking
    from .synth.scene_io import Scene

PAD_COST = 1e6


@dataclass
class MatchResult:
    """Optimal prediction-to-ground-truth assignment.

    ``assignment`` holds (prediction, ground truth) pairs sorted by ground
    truth; ``overflow`` lists ground truths left without a prediction.
    """

    assignment: list[tuple[int, int]]
    cost: float
    n_pred: int
    n_gt: int
    overflow: list[int] = field(default_factory=list)

    def gt_for_pred(self) -> np.ndarray:
        out = np.full(self.n_pred, -1, dtype=np.int64)
        for p, g in self.assignment:
            out[p] = g
        return out

    @property
    def unmatched(self) -> list[int]:
        taken = {p for p, _ in self.assignment}
        return [i for i in range(self.n_pred) if i not in taken]


def hungarian(cost) -> MatchResult:
    """Min-cost assignment of every ground-truth column.

    More columns than rows are handled by padding rows at a large finite cost;
    columns landing on padding are reported as overflow. Among optimal
    assignments the one favouring lower prediction indices is preferred.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    n, m = c.shape
    if m == 0:
        return MatchResult([], 0.0, n, 0)
    padded = c
    if m > n:
        padded = np.vstack([c, np.full((m - n, m), PAD_COST)])

    rows, cols = linear_sum_assignment(padded)
    best = math.fsum(padded[rows, cols])

    # prefer lower prediction indices among ties
    scale = max(float(np.abs(c).max()), 1.0)
    bias = np.arange(padded.shape[0], dtype=np.float64)[:, None] * (scale * 1e-9 / padded.shape[0])
    t_rows, t_cols = linear_sum_assignment(padded + bias)
    if math.fsum(padded[t_rows, t_cols]) == best:
        rows, cols = t_rows, t_cols

    assignment = sorted(((int(r), int(k)) for r, k in zip(rows, cols) if r < n), key=lambda rc: rc[1])
    overflow = sorted(int(k) for r, k in zip(rows, cols) if r >= n)
    total = math.fsum(c[r, k] for r, k in assignment)
    return MatchResult(assignment, total, n, m, overflow)


def cost_matrix(
    pred_h: np.ndarray,
    pred_o: np.ndarray,
    class_probs: np.ndarray,
    gt_h: np.ndarray,
    gt_o: np.ndarray,
    gt_classes: Sequence[int],
    w: LossWeights,
) -> np.ndarray:
    """Matching costs of N predictions against M ground-truth pairs (N x M)."""
    gt_h = np.asarray(gt_h, dtype=np.float64).reshape(-1, 4)
    gt_o = np.asarray(gt_o, dtype=np.float64).reshape(-1, 4)
    classes = np.asarray(gt_classes, dtype=np.int64)
    n, m = len(pred_h), len(gt_h)
    if m == 0 or n == 0:
        return np.zeros((n, m))
    cls = 1.0 - np.asarray(class_probs, dtype=np.float64)[:, classes]
    l1 = np.abs(pred_h[:, None, :] - gt_h[None]).sum(-1) + np.abs(pred_o[:, None, :] - gt_o[None]).sum(-1)
    giou = (1.0 - giou_array(pred_h, gt_h)) + (1.0 - giou_array(pred_o, gt_o))
    return w.lambda3 * cls + w.lambda2 * l1 + w.lambda1 * giou


def match_cost(
    pred_h: Sequence[float],
    pred_o: Sequence[float],
    class_probs: Sequence[float],
    gt_h: Sequence[float],
    gt_o: Sequence[float],
    gt_class: int,
    w: LossWeights,
) -> float:
    return float(
        cost_matrix(
            np.asarray(pred_h, dtype=np.float64).reshape(1, 4),
            np.asarray(pred_o, dtype=np.float64).reshape(1, 4),
            np.asarray(class_probs, dtype=np.float64).reshape(1, -1),
            gt_h,
            gt_o,
            [gt_class],
            w,
        )[0, 0]
    )


@dataclass
class LabelAssignment:
    targets: PairTargets
    labels: np.ndarray
    n_t: dict[int, int]
    overflow: int
    match: MatchResult

    def group_labels(self, group: FieldGroup) -> np.ndarray:
        return self.labels[group.as_array()]


def assign_labels(
    scene: "Scene",
    pred_h: np.ndarray,
    pred_o: np.ndarray,
    class_probs: np.ndarray,
    groups: Sequence[FieldGroup],
    w: LossWeights,
    num_verbs: int,
) -> LabelAssignment:
    """Match predictions to the scene's ground truth and derive per-group labels.

    Matched rows take the ground-truth boxes, class and verbs and are
    interactive; unmatched rows get the no-object class. Matching runs across
    the whole scene; ``n_t`` is then counted per group.
    """
    n = len(pred_h)
    no_object = class_probs.shape[1] - 1 if n else 0
    gt_h = np.array([scene.humans[p.human].as_array() for p in scene.gt_pairs]).reshape(-1, 4)
    gt_o = np.array([scene.objects[p.obj].box.as_array() for p in scene.gt_pairs]).reshape(-1, 4)
    gt_cls = [scene.objects[p.obj].cls for p in scene.gt_pairs]
    match = hungarian(cost_matrix(pred_h, pred_o, class_probs, gt_h, gt_o, gt_cls, w))

    matched = np.zeros(n, dtype=bool)
    target_h = np.asarray(pred_h, dtype=np.float64).copy()
    target_o = np.asarray(pred_o, dtype=np.float64).copy()
    classes = np.full(n, no_object, dtype=np.int64)
    verbs = np.zeros((n, num_verbs))
    for p, g in match.assignment:
        pair = scene.gt_pairs[g]
        matched[p] = True
        target_h[p] = gt_h[g]
        target_o[p] = gt_o[g]
        classes[p] = gt_cls[g]
        verbs[p, list(pair.verbs)] = 1.0

    labels = matched.astype(np.int64)
    n_t = {i: int(labels[grp.as_array()].sum()) for i, grp in enumerate(groups)}
    targets = PairTargets(matched, target_h, target_o, classes, verbs)
    return LabelAssignment(targets, labels, n_t, len(match.overflow), match)


__all__ = [
    "LabelAssignment",
    "MatchResult",
    "PAD_COST",
    "assign_labels",
    "cost_matrix",
    "hungarian",
    "match_cost",
]
