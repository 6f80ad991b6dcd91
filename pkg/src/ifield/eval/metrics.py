"""Detection metrics: interactiveness AP, verb AP, top-k filtering, PR curves and count error."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, field_validator

from ..config import REGIMES
from ..errors import EmptyGroundTruthWarning
from ..geometry import iou_array
from ..synth import Scene


class DetectionRecord(BaseModel):
    """One scored pair prediction, as stored in prediction files."""

    scene: int
    human_box: tuple[float, float, float, float]
    object_box: tuple[float, float, float, float]
    object_class: int
    s_b: float | None = None
    s_v: list[float] = []
    s: list[float] = []

    @field_validator("s_b")
    @classmethod
    def _unit(cls, value: float | None) -> float | None:
        if value is not None and not 0.0 <= value <= 1.0:
            raise ValueError(f"score {value} outside [0, 1]")
        return value

    @field_validator("s_v", "s")
    @classmethod
    def _unit_list(cls, value: list[float]) -> list[float]:
        if any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("scores must lie in [0, 1]")
        return value

    @property
    def interactiveness(self) -> float:
        """S_b, or the mean verb score when the producer reported none."""
        if self.s_b is not None:
            return self.s_b
        return math.fsum(self.s_v) / len(self.s_v) if self.s_v else 0.0

    @property
    def score(self) -> float:
        return max(self.s) if self.s else 0.0

    def verb_score(self, verb: int) -> float:
        return self.s[verb] if verb < len(self.s) else 0.0


@dataclass(frozen=True)
class GtEntry:
    scene: int
    human_box: np.ndarray
    object_box: np.ndarray
    object_class: int
    verbs: tuple[int, ...]


def ground_truth(scenes: Iterable[Scene]) -> list[GtEntry]:
    return [
        GtEntry(
            scene.index,
            scene.humans[p.human].as_array(),
            scene.objects[p.obj].box.as_array(),
            scene.objects[p.obj].cls,
            p.verbs,
        )
        for scene in scenes
        for p in scene.gt_pairs
    ]


def rank(records: Sequence[DetectionRecord], key: Callable[[DetectionRecord], float]) -> list[int]:
    """Indices by descending ``key``; equal scores keep their input order."""
    return sorted(range(len(records)), key=lambda i: -key(records[i]))


def match_ranked(
    records: Sequence[DetectionRecord],
    order: Sequence[int],
    gts: Sequence[GtEntry],
    iou_thr: float = 0.5,
    class_aware: bool = True,
) -> np.ndarray:
    """True-positive flags in rank order.

    A prediction is a hit when an unmatched ground truth of the same scene (and
    class, unless ``class_aware`` is off) has human IoU and object IoU above
    ``iou_thr``; among several, the one with the largest min(IoU_h, IoU_o) is
    taken, ties to the lowest index.
    """
    by_scene: dict[int, list[int]] = {}
    for gi, gt in enumerate(gts):
        by_scene.setdefault(gt.scene, []).append(gi)
    stacked_h = {s: np.array([gts[g].human_box for g in idx]) for s, idx in by_scene.items()}
    stacked_o = {s: np.array([gts[g].object_box for g in idx]) for s, idx in by_scene.items()}

    used: set[int] = set()
    hits = np.zeros(len(order), dtype=bool)
    for rank_pos, ri in enumerate(order):
        rec = records[ri]
        idx = by_scene.get(rec.scene)
        if not idx:
            continue
        ih = iou_array(np.asarray(rec.human_box), stacked_h[rec.scene])[0]
        io = iou_array(np.asarray(rec.object_box), stacked_o[rec.scene])[0]
        best, best_q = -1, -1.0
        for j, gi in enumerate(idx):
            if gi in used or (class_aware and gts[gi].object_class != rec.object_class):
                continue
            if ih[j] > iou_thr and io[j] > iou_thr:
                q = min(ih[j], io[j])
                if q > best_q:
                    best, best_q = gi, q
        if best >= 0:
            used.add(best)
            hits[rank_pos] = True
    return hits


def average_precision(hits: np.ndarray, n_gt: int) -> float:
    """All-points interpolated AP of rank-ordered hit flags."""
    if n_gt == 0:
        return 0.0
    if hits.size == 0:
        return 0.0
    tp = np.cumsum(hits, dtype=np.float64)
    fp = np.cumsum(~hits, dtype=np.float64)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def interactiveness_ap(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    iou_thr: float = 0.5,
    class_aware: bool = True,
) -> float:
    gts = ground_truth(scenes)
    if not gts:
        warnings.warn("no ground-truth interactive pairs; interactiveness AP is 0", EmptyGroundTruthWarning, stacklevel=2)
        return 0.0
    order = rank(records, lambda r: r.interactiveness)
    return average_precision(match_ranked(records, order, gts, iou_thr, class_aware), len(gts))


class VerbAP(BaseModel):
    per_verb: dict[int, float]
    mean: float


def verb_ap(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    iou_thr: float = 0.5,
    class_aware: bool = True,
) -> VerbAP:
    """Per-verb AP ranked by S of that verb; the mean covers verbs with ground truth."""
    gts = ground_truth(scenes)
    verbs = sorted({v for gt in gts for v in gt.verbs})
    per_verb: dict[int, float] = {}
    for v in verbs:
        verb_gts = [gt for gt in gts if v in gt.verbs]
        order = rank(records, lambda r, v=v: r.verb_score(v))
        per_verb[v] = average_precision(match_ranked(records, order, verb_gts, iou_thr, class_aware), len(verb_gts))
    if not per_verb:
        warnings.warn("no ground-truth verbs; verb mAP is 0", EmptyGroundTruthWarning, stacklevel=2)
        return VerbAP(per_verb={}, mean=0.0)
    return VerbAP(per_verb=per_verb, mean=math.fsum(per_verb.values()) / len(per_verb))


def topk_filter(
    records: Sequence[DetectionRecord],
    k: int,
    key: Callable[[DetectionRecord], float] | None = None,
) -> list[DetectionRecord]:
    """Keep the ``k`` highest-scored records of every scene, in their original order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    key = key or (lambda r: r.score)
    by_scene: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        by_scene.setdefault(rec.scene, []).append(i)
    keep: set[int] = set()
    for idx in by_scene.values():
        keep.update(sorted(idx, key=lambda i: -key(records[i]))[:k])
    return [rec for i, rec in enumerate(records) if i in keep]


def pr_curve(
    records: Sequence[DetectionRecord],
    gts: Sequence[GtEntry],
    key: Callable[[DetectionRecord], float],
    iou_thr: float = 0.5,
    class_aware: bool = True,
) -> list[tuple[float, float]]:
    """(recall, precision) at every distinct score threshold, framed by (0, 1) and (final recall, 0)."""
    order = rank(records, key)
    hits = match_ranked(records, order, gts, iou_thr, class_aware)
    n_gt = max(len(gts), 1)
    points = [(0.0, 1.0)]
    tp = fp = 0
    for pos, ri in enumerate(order):
        if hits[pos]:
            tp += 1
        else:
            fp += 1
        last = pos + 1 == len(order)
        if last or key(records[order[pos + 1]]) != key(records[ri]):
            points.append((tp / n_gt, tp / (tp + fp)))
    points.append((tp / n_gt, 0.0))
    return points


def count_error(
    predicted: Sequence[float],
    n_t: Sequence[int],
    regimes: Sequence[str],
) -> dict[str, float]:
    """Mean |predicted interactive count - n_T| per regime; empty regimes are omitted."""
    if not (len(predicted) == len(n_t) == len(regimes)):
        raise ValueError("count_error inputs must have the same length")
    buckets: dict[str, list[float]] = {}
    for pred, truth, regime in zip(predicted, n_t, regimes):
        buckets.setdefault(regime, []).append(abs(float(pred) - float(truth)))
    ordered = [r for r in REGIMES if r in buckets] + sorted(r for r in buckets if r not in REGIMES)
    return {r: math.fsum(buckets[r]) / len(buckets[r]) for r in ordered}


def ap_by_regime(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    iou_thr: float = 0.5,
    class_aware: bool = True,
) -> dict[str, float]:
    out: dict[str, float] = {}
    for regime in REGIMES:
        subset = [s for s in scenes if s.regime == regime]
        if not any(s.gt_pairs for s in subset):
            continue
        ids = {s.index for s in subset}
        out[regime] = interactiveness_ap([r for r in records if r.scene in ids], subset, iou_thr, class_aware)
    return out


def ap_by_class(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    iou_thr: float = 0.5,
) -> dict[int, float]:
    gts = ground_truth(scenes)
    out: dict[int, float] = {}
    for cls in sorted({gt.object_class for gt in gts}):
        cls_gts = [gt for gt in gts if gt.object_class == cls]
        cls_records = [r for r in records if r.object_class == cls]
        order = rank(cls_records, lambda r: r.interactiveness)
        out[cls] = average_precision(match_ranked(cls_records, order, cls_gts, iou_thr, True), len(cls_gts))
    return out


__all__ = [
    "DetectionRecord",
    "GtEntry",
    "VerbAP",
    "ap_by_class",
    "ap_by_regime",
    "average_precision",
    "count_error",
    "ground_truth",
    "interactiveness_ap",
    "match_ranked",
    "pr_curve",
    "rank",
    "topk_filter",
    "verb_ap",
]
