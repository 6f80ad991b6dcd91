from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, TypeVar

import numpy as np

from .engine import Value, maximum, minimum


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in normalized image coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite: {coords}")
        if not all(0.0 <= c <= 1.0 for c in coords):
            raise ValueError(f"box coordinates must lie in [0, 1]: {coords}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValueError(f"box must have positive area: {coords}")

    @classmethod
    def from_array(cls, values: Sequence[float]) -> Box:
        x1, y1, x2, y2 = (float(v) for v in values)
        return cls(x1, y1, x2, y2)

    @classmethod
    def clipped(cls, values: Sequence[float], min_size: float = 1e-3) -> Box:
        """Clamp raw regression output into a valid box."""
        x1, y1, x2, y2 = (float(np.clip(v, 0.0, 1.0)) for v in values)
        x1, x2 = min(x1, x2), max(x1, x2)
        y1, y2 = min(y1, y2), max(y1, y2)
        if x2 - x1 < min_size:
            x1 = min(x1, 1.0 - min_size)
            x2 = x1 + min_size
        if y2 - y1 < min_size:
            y1 = min(y1, 1.0 - min_size)
            y2 = y1 + min_size
        return cls(x1, y1, x2, y2)

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


def _intersection(a: Box, b: Box) -> float:
    w = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    h = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    return w * h


def iou(a: Box, b: Box) -> float:
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    return inter / union


def giou(a: Box, b: Box) -> float:
    inter = _intersection(a, b)
    union = a.area + b.area - inter
    enclose = (max(a.x2, b.x2) - min(a.x1, b.x1)) * (max(a.y2, b.y2) - min(a.y1, b.y1))
    return inter / union - (enclose - union) / enclose


def iou_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between (N, 4) and (M, 4) corner arrays."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))[:, None, :]
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))[None, :, :]
    iw = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0.0, None)
    ih = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0.0, None)
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    return inter / (area_a + area_b - inter)


def giou_array(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Pairwise generalized IoU between (N, 4) and (M, 4) corner arrays."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    p = pred[:, None, :]
    t = target[None, :, :]
    area_p = np.clip(p[..., 2] - p[..., 0], 0.0, None) * np.clip(p[..., 3] - p[..., 1], 0.0, None)
    area_t = (t[..., 2] - t[..., 0]) * (t[..., 3] - t[..., 1])
    iw = np.clip(np.minimum(p[..., 2], t[..., 2]) - np.maximum(p[..., 0], t[..., 0]), 0.0, None)
    ih = np.clip(np.minimum(p[..., 3], t[..., 3]) - np.maximum(p[..., 1], t[..., 1]), 0.0, None)
    inter = iw * ih
    union = area_p + area_t - inter
    ew = np.maximum(p[..., 2], t[..., 2]) - np.minimum(p[..., 0], t[..., 0])
    eh = np.maximum(p[..., 3], t[..., 3]) - np.minimum(p[..., 1], t[..., 1])
    enclose = ew * eh
    return inter / union - (enclose - union) / enclose


def giou_values(pred: Value, target: np.ndarray) -> Value:
    """Row-wise differentiable generalized IoU of predicted (N, 4) boxes vs fixed targets."""
    t = np.atleast_2d(np.asarray(target, dtype=np.float64))
    px1, py1, px2, py2 = (pred[:, k] for k in range(4))
    tx1, ty1, tx2, ty2 = (t[:, k] for k in range(4))
    area_p = maximum(px2 - px1, 0.0) * maximum(py2 - py1, 0.0)
    area_t = (tx2 - tx1) * (ty2 - ty1)
    iw = maximum(minimum(px2, tx2) - maximum(px1, tx1), 0.0)
    ih = maximum(minimum(py2, ty2) - maximum(py1, ty1), 0.0)
    inter = iw * ih
    union = area_p + area_t - inter
    enclose = (maximum(px2, tx2) - minimum(px1, tx1)) * (maximum(py2, ty2) - minimum(py1, ty1))
    return inter / union - (enclose - union) / enclose


class ScoredPair(Protocol):
    human_box: Box
    object_box: Box
    object_class: int

    @property
    def score(self) -> float: ...


P = TypeVar("P", bound=ScoredPair)


def pairwise_nms(preds: Sequence[P], thr: float = 0.6) -> list[P]:
    """Greedy pair-wise NMS.

    A prediction is dropped when a kept, higher-scored prediction of the same
    object class overlaps it with human IoU > thr and object IoU > thr. Equal
    scores keep their input order.
    """
    if not 0.0 < thr < 1.0:
        raise ValueError(f"NMS threshold must be in (0, 1), got {thr}")
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    kept: list[P] = []
    for i in order:
        cand = preds[i]
        suppressed = any(
            k.object_class == cand.object_class
            and iou(k.human_box, cand.human_box) > thr
            and iou(k.object_box, cand.object_box) > thr
            for k in kept
        )
        if not suppressed:
            kept.append(cand)
    return kept


__all__ = [
    "Box",
    "iou",
    "giou",
    "giou_array",
    "iou_array",
    "giou_values",
    "pairwise_nms",
    "ScoredPair",
]
