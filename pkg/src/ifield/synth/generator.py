"""Synthetic scenes with a bimodal interactiveness prior.

A scene draws its regime first, then a human count for which that regime is
realizable, then per object how many humans interact with it. Interactive
humans are placed close to their object, the rest are kept away from every
object, and verbs follow the human's direction as seen from the object so the
geometric descriptors carry all the signal the trainer needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from pydantic import BaseModel
from scipy.stats import chisquare, truncnorm

from ..config import REGIMES, GeneratorConfig, feasible_counts
from ..geometry import Box
from .scene_io import GtPair, Scene, SceneObject

PROXIMITY = 0.3
HUB_RADIUS = 0.04
ANCHOR_RADIUS = (0.08, 0.18)
OBJECT_REGION = (0.35, 0.65)
TRUNCATION = 3.0
_CANDIDATE_STREAM = 1
_CLASS_MEAN_STREAM = 2**31 - 1


def scene_rng(master: int, index: int, stream: int | None = None) -> np.random.Generator:
    entropy = [master, index] if stream is None else [master, index, stream]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _draw_regime(rng: np.random.Generator, cfg: GeneratorConfig) -> str:
    cumulative = np.cumsum(cfg.mixture)
    slot = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return REGIMES[min(slot, len(REGIMES) - 1)]


def sample_regime(cfg: GeneratorConfig, index: int) -> str:
    """Regime of scene ``index``; the same value ``sample_scene`` draws first."""
    return _draw_regime(scene_rng(cfg.seed, index), cfg)


def _box_around(cx: float, cy: float, w: float, h: float) -> Box:
    cx = min(max(cx, w / 2), 1.0 - w / 2)
    cy = min(max(cy, h / 2), 1.0 - h / 2)
    return Box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def _direction_verbs(angle: float, cls: int, rng: np.random.Generator, num_verbs: int) -> tuple[int, ...]:
    sector = 2.0 * math.pi / num_verbs
    primary = int((angle % (2.0 * math.pi)) // sector) % num_verbs
    verbs = {primary}
    if num_verbs > 1 and rng.random() < 0.5:
        verbs.add((primary + 1 + cls) % num_verbs)
    return tuple(sorted(verbs))


def sample_scene(cfg: GeneratorConfig, index: int) -> Scene:
    rng = scene_rng(cfg.seed, index)
    regime = _draw_regime(rng, cfg)

    lo, hi = cfg.humans
    feasible_h = [h for h in range(lo, hi + 1) if feasible_counts(regime, h)]
    n_humans = int(rng.choice(feasible_h))
    n_objects = int(rng.integers(cfg.objects[0], cfg.objects[1] + 1))
    classes = rng.integers(0, cfg.object_classes, size=n_objects)

    counts = feasible_counts(regime, n_humans)
    interactors: list[np.ndarray] = []
    for _ in range(n_objects):
        k = int(rng.choice(counts))
        interactors.append(np.sort(rng.choice(n_humans, size=k, replace=False)))

    anchors: dict[int, int] = {}
    links = np.zeros(n_humans, dtype=np.int64)
    for o, hs in enumerate(interactors):
        for h in hs:
            anchors.setdefault(int(h), o)
            links[h] += 1

    # humans linked to several objects need every object within reach
    if links.max(initial=0) >= 2:
        hub = rng.uniform(0.4, 0.6, size=2)
        radius = HUB_RADIUS * np.sqrt(rng.random(n_objects))
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n_objects)
        centres = hub + np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    else:
        centres = rng.uniform(*OBJECT_REGION, size=(n_objects, 2))
    sizes = rng.uniform(0.05, 0.12, size=(n_objects, 2))
    objects = [
        SceneObject(_box_around(centres[o, 0], centres[o, 1], sizes[o, 0], sizes[o, 1]), int(classes[o]))
        for o in range(n_objects)
    ]
    obj_centres = np.array([o.box.center for o in objects])

    humans: list[Box] = []
    for h in range(n_humans):
        w, ht = rng.uniform(0.06, 0.12), rng.uniform(0.12, 0.24)
        if h in anchors:
            theta = rng.uniform(0.0, 2.0 * math.pi)
            r = rng.uniform(*ANCHOR_RADIUS)
            cx, cy = obj_centres[anchors[h]] + r * np.array([math.cos(theta), math.sin(theta)])
        else:
            best, best_gap = None, -1.0
            for _ in range(100):
                point = rng.uniform(0.05, 0.95, size=2)
                gap = float(np.linalg.norm(obj_centres - point, axis=1).min())
                if gap > best_gap:
                    best, best_gap = point, gap
                if gap > PROXIMITY:
                    break
            cx, cy = best
        humans.append(_box_around(float(cx), float(cy), w, ht))

    gt_pairs: list[GtPair] = []
    for o, hs in enumerate(interactors):
        ox, oy = objects[o].box.center
        for h in hs:
            hx, hy = humans[int(h)].center
            angle = math.atan2(hy - oy, hx - ox)
            gt_pairs.append(GtPair(int(h), o, _direction_verbs(angle, objects[o].cls, rng, cfg.verbs)))

    return Scene(humans, objects, gt_pairs, regime, seed=(cfg.seed, index), index=index)


# ------------------------------------------------------------- candidates


@dataclass
class CandidateSet:
    """The full human x object candidate grid of one scene, ordered object-major."""

    scene_index: int
    human_idx: np.ndarray
    object_idx: np.ndarray
    object_class: np.ndarray
    human_boxes: np.ndarray
    object_boxes: np.ndarray
    descriptors: np.ndarray
    oracle: np.ndarray
    interactive: np.ndarray
    verbs: np.ndarray

    def __len__(self) -> int:
        return int(self.human_idx.shape[0])

    def inputs(self, mode: str) -> np.ndarray:
        """Model input rows: geometric descriptors, plus the oracle features in oracle mode."""
        if mode == "oracle":
            return np.concatenate([self.descriptors, self.oracle], axis=1)
        return self.descriptors


def descriptor_dim(cfg: GeneratorConfig) -> int:
    base = 13 + cfg.object_classes
    return base + cfg.feature_dim if cfg.feature_mode == "oracle" else base


def pair_descriptors(human_boxes: np.ndarray, object_boxes: np.ndarray, classes: np.ndarray, num_classes: int) -> np.ndarray:
    """Boxes, object one-hot and the human offset seen from the object (dx, dy, distance, unit direction)."""
    hc = 0.5 * (human_boxes[:, :2] + human_boxes[:, 2:])
    oc = 0.5 * (object_boxes[:, :2] + object_boxes[:, 2:])
    offset = hc - oc
    dist = np.linalg.norm(offset, axis=1, keepdims=True)
    unit = offset / np.maximum(dist, 1e-9)
    onehot = np.zeros((len(classes), num_classes))
    onehot[np.arange(len(classes)), classes] = 1.0
    return np.concatenate([human_boxes, object_boxes, offset, dist, unit, onehot], axis=1)


def class_means(cfg: GeneratorConfig, master: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-class (non-interactive, interactive) feature means, delta * sigma apart."""
    rng = scene_rng(cfg.seed if master is None else master, _CLASS_MEAN_STREAM)
    mu_n = rng.normal(0.0, cfg.feature_std, size=(cfg.object_classes, cfg.feature_dim))
    direction = rng.normal(size=(cfg.object_classes, cfg.feature_dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    mu_i = mu_n + cfg.separation * cfg.feature_std * direction
    return mu_n, mu_i


def build_candidates(scene: Scene, cfg: GeneratorConfig) -> CandidateSet:
    """Detections for the scene's candidate grid, jittered around the ground-truth boxes."""
    master, index = scene.seed
    rng = scene_rng(master, index, _CANDIDATE_STREAM)
    n_h, n_o = len(scene.humans), len(scene.objects)

    def _jitter(box: Box) -> np.ndarray:
        noisy = box.as_array() + rng.normal(0.0, cfg.box_jitter, size=4) if cfg.box_jitter else box.as_array()
        return Box.clipped(noisy).as_array()

    det_h = np.array([_jitter(b) for b in scene.humans]).reshape(n_h, 4)
    det_o = np.array([_jitter(o.box) for o in scene.objects]).reshape(n_o, 4)

    object_idx = np.repeat(np.arange(n_o), n_h)
    human_idx = np.tile(np.arange(n_h), n_o)
    classes = np.array([scene.objects[o].cls for o in object_idx], dtype=np.int64)
    interactive = np.array([scene.is_interactive(h, o) for h, o in zip(human_idx, object_idx)], dtype=bool)

    verbs = np.zeros((len(human_idx), cfg.verbs))
    row_of = {(int(h), int(o)): i for i, (h, o) in enumerate(zip(human_idx, object_idx))}
    for pair in scene.gt_pairs:
        verbs[row_of[(pair.human, pair.obj)], list(pair.verbs)] = 1.0

    mu_n, mu_i = class_means(cfg, master)
    means = np.where(interactive[:, None], mu_i[classes], mu_n[classes])
    noise = truncnorm.rvs(-TRUNCATION, TRUNCATION, size=(len(human_idx), cfg.feature_dim), random_state=rng)
    oracle = means + cfg.feature_std * noise

    h_boxes, o_boxes = det_h[human_idx], det_o[object_idx]
    return CandidateSet(
        scene_index=scene.index,
        human_idx=human_idx,
        object_idx=object_idx,
        object_class=classes,
        human_boxes=h_boxes,
        object_boxes=o_boxes,
        descriptors=pair_descriptors(h_boxes, o_boxes, classes, cfg.object_classes),
        oracle=oracle,
        interactive=interactive,
        verbs=verbs,
    )


def generate_scene(cfg: GeneratorConfig, index: int) -> tuple[Scene, CandidateSet]:
    scene = sample_scene(cfg, index)
    return scene, build_candidates(scene, cfg)


# ---------------------------------------------------------------- dataset


class Manifest(BaseModel):
    count: int
    seed: int
    configured: dict[str, float]
    counts: dict[str, int]
    frequencies: dict[str, float]
    chi_square: float
    p_value: float
    generator: dict


def regime_counts(cfg: GeneratorConfig, count: int) -> dict[str, int]:
    counts = dict.fromkeys(REGIMES, 0)
    for index in range(count):
        counts[sample_regime(cfg, index)] += 1
    return counts


def build_manifest(cfg: GeneratorConfig, count: int) -> Manifest:
    counts = regime_counts(cfg, count)
    weights = cfg.weights()
    active = [r for r in REGIMES if weights[r] > 0]
    if len(active) > 1:
        observed = np.array([counts[r] for r in active], dtype=np.float64)
        expected = np.array([weights[r] for r in active]) * count
        expected *= observed.sum() / expected.sum()
        stat, p_value = chisquare(observed, expected)
    else:
        stat, p_value = 0.0, 1.0
    return Manifest(
        count=count,
        seed=cfg.seed,
        configured=weights,
        counts=counts,
        frequencies={r: counts[r] / count for r in REGIMES},
        chi_square=float(stat),
        p_value=float(p_value),
        generator=cfg.model_dump(mode="json"),
    )


def generate_dataset(cfg: GeneratorConfig, count: int) -> tuple[Iterator[Scene], Manifest]:
    """Lazily generated scenes ``0..count-1`` and the manifest of their realized regimes."""
    if count < 1:
        raise ValueError("count must be at least 1")
    manifest = build_manifest(cfg, count)
    return (sample_scene(cfg, i) for i in range(count)), manifest


__all__ = [
    "CandidateSet",
    "Manifest",
    "build_candidates",
    "build_manifest",
    "class_means",
    "descriptor_dim",
    "generate_dataset",
    "generate_scene",
    "pair_descriptors",
    "regime_counts",
    "sample_regime",
    "sample_scene",
    "scene_rng",
]
