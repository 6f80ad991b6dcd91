"""Inference: per-pair interactiveness S_b, verb scores S_v and final scores S = S_v * S_b."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..field import ClusterSettings, group_candidates, run_field
from ..geometry import Box, pairwise_nms
from ..synth import CandidateSet, Scene
from .model import ModelParams, field_params, forward


@dataclass
class PairPrediction:
    scene: int
    human_box: Box
    object_box: Box
    object_class: int
    s_b: float | None
    s_v: np.ndarray
    s: np.ndarray
    interactive_mass: float

    @property
    def score(self) -> float:
        return float(self.s.max()) if self.s.size else 0.0


@dataclass
class ScenePrediction:
    scene: int
    regime: str
    detections: list[PairPrediction]
    interactive_count: float
    n_t: int
    candidates: int


@dataclass(frozen=True)
class PredictOptions:
    use_sb: bool = True
    nms_thr: float = 0.6
    iters: int = 20
    tol: float = 1e-6


def score_candidates(params: ModelParams, cands: CandidateSet, options: PredictOptions = PredictOptions()) -> list[PairPrediction]:
    """Score every candidate of a scene, before NMS.

    The field runs per object group and its minority cluster is read as
    interactive. Without a field (mode ``none``) or with ``use_sb`` off, S
    equals S_v and no S_b is reported, so rankings fall back to the mean verb
    score.
    """
    spec = params.spec
    leaves = params.leaves()
    out = forward(leaves, cands.inputs(spec.feature_mode), cands.human_boxes, cands.object_boxes)
    s_v = out.verb_scores()
    n = len(cands)

    use_field = spec.field_mode != "none"
    s_b = np.zeros(n)
    mass = np.zeros(n)
    if use_field:
        settings = ClusterSettings(options.iters, options.tol)
        fparams = field_params(leaves, spec)
        for group in group_candidates(cands.object_idx, cands.object_class):
            rows = group.as_array()
            fo = run_field(out.features[rows], spec.variant, fparams, settings)
            s_b[rows] = fo.scores()
            mass[rows] = fo.interactive.data
    else:
        s_b = s_v.mean(axis=1) if s_v.shape[1] else np.zeros(n)
        mass = s_b.copy()

    with_sb = use_field and options.use_sb
    final = s_v * s_b[:, None] if with_sb else s_v
    classes = out.class_probs()[:, : spec.num_classes].argmax(axis=1)
    return [
        PairPrediction(
            scene=cands.scene_index,
            human_box=Box.clipped(out.human_boxes.data[i]),
            object_box=Box.clipped(out.object_boxes.data[i]),
            object_class=int(classes[i]),
            s_b=float(s_b[i]) if with_sb else None,
            s_v=s_v[i].copy(),
            s=final[i].copy(),
            interactive_mass=float(mass[i]),
        )
        for i in range(n)
    ]


def predict(params: ModelParams, scene: Scene, cands: CandidateSet, options: PredictOptions = PredictOptions()) -> ScenePrediction:
    scored = score_candidates(params, cands, options)
    kept = pairwise_nms(scored, options.nms_thr)
    return ScenePrediction(
        scene=scene.index,
        regime=scene.regime,
        detections=kept,
        interactive_count=math.fsum(p.interactive_mass for p in scored),
        n_t=scene.n_interactive,
        candidates=len(scored),
    )


__all__ = ["PairPrediction", "PredictOptions", "ScenePrediction", "predict", "score_candidates"]
