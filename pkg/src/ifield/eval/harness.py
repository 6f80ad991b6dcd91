"""End-to-end evaluation: predict every scene, then compute and assemble the report."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from pydantic import ValidationError

from .. import __version__
from ..config import EvalOptions, RunConfig
from ..errors import DataError
from ..synth import Scene, build_candidates
from ..train import ModelParams, PredictOptions, ScenePrediction, predict
from .metrics import (
    DetectionRecord,
    ap_by_class,
    ap_by_regime,
    count_error,
    ground_truth,
    interactiveness_ap,
    pr_curve,
    topk_filter,
    verb_ap,
)
from .report import EvalReport, ProtocolMetrics, RunMetadata


@dataclass
class Evaluation:
    report: EvalReport
    predictions: list[ScenePrediction]
    records: list[DetectionRecord]


def _unit(x: float) -> float:
    return float(np.clip(x, 0.0, 1.0))


def to_records(prediction: ScenePrediction) -> list[DetectionRecord]:
    return [
        DetectionRecord(
            scene=p.scene,
            human_box=tuple(p.human_box.as_list()),
            object_box=tuple(p.object_box.as_list()),
            object_class=p.object_class,
            s_b=None if p.s_b is None else _unit(p.s_b),
            s_v=[_unit(v) for v in p.s_v],
            s=[_unit(v) for v in p.s],
        )
        for p in prediction.detections
    ]


def write_predictions(path: str | Path, records: Iterable[DetectionRecord]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.model_dump(mode="json"), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
            count += 1
    return count


def read_predictions(path: str | Path) -> list[DetectionRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"prediction file not found: {path}")
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(DetectionRecord.model_validate_json(line))
            except ValidationError as exc:
                raise DataError(f"{path}:{lineno}: malformed prediction record ({exc.errors()[0]['msg']})") from exc
    return records


def predict_scenes(
    params: ModelParams,
    scenes: Sequence[Scene],
    cfg: RunConfig,
    options: PredictOptions,
    threads: int = 1,
) -> list[ScenePrediction]:
    """Predictions in scene order; each scene is independent so workers never share state."""

    def job(scene: Scene) -> ScenePrediction:
        return predict(params, scene, build_candidates(scene, cfg.generator), options)

    if threads > 1 and len(scenes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(job, scenes))
    return [job(s) for s in scenes]


def _protocol(records: Sequence[DetectionRecord], scenes: Sequence[Scene], opts: EvalOptions) -> ProtocolMetrics:
    verbs = verb_ap(records, scenes, opts.iou_thr, opts.class_aware)
    return ProtocolMetrics(
        interactiveness_ap=interactiveness_ap(records, scenes, opts.iou_thr, opts.class_aware),
        verb_map=verbs.mean,
        per_verb_ap=verbs.per_verb,
        detections=len(records),
    )


def build_report(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    opts: EvalOptions,
    meta: RunMetadata,
    counts: Sequence[float] | None = None,
) -> EvalReport:
    """Assemble every metric over ``records``.

    ``counts`` holds the predicted interactive count of each scene; without it
    the count-error table stays empty.
    """
    gts = ground_truth(scenes)
    protocols: dict[str, ProtocolMetrics] = {}
    curves: dict[str, list[tuple[float, float]]] = {}
    variants = [(f"top{k}", topk_filter(records, k)) for k in opts.topk] + [("all", list(records))]
    for name, subset in variants:
        protocols[name] = _protocol(subset, scenes, opts)
        curves[name] = pr_curve(subset, gts, lambda r: r.interactiveness, opts.iou_thr, opts.class_aware)

    verb_curves = {}
    for v in sorted(protocols["all"].per_verb_ap):
        verb_gts = [gt for gt in gts if v in gt.verbs]
        verb_curves[f"verb {v}"] = pr_curve(
            records, verb_gts, lambda r, v=v: r.verb_score(v), opts.iou_thr, opts.class_aware
        )

    errors: dict[str, float] = {}
    if counts is not None:
        errors = count_error(counts, [s.n_interactive for s in scenes], [s.regime for s in scenes])

    return EvalReport(
        protocols=protocols,
        count_error=errors,
        ap_by_regime=ap_by_regime(records, scenes, opts.iou_thr, opts.class_aware) if gts else {},
        ap_by_class=ap_by_class(records, scenes, opts.iou_thr),
        pr_curves=curves,
        verb_curves=verb_curves,
        meta=meta,
    )


def evaluate(
    params: ModelParams,
    scenes: Sequence[Scene],
    cfg: RunConfig,
    *,
    opts: EvalOptions | None = None,
    threads: int = 1,
    checkpoint: str | None = None,
) -> Evaluation:
    opts = opts or cfg.eval
    options = PredictOptions(use_sb=opts.use_sb, nms_thr=opts.nms_thr, iters=cfg.field.iters, tol=cfg.field.tol)
    predictions = predict_scenes(params, scenes, cfg, options, threads)
    records = [rec for p in predictions for rec in to_records(p)]
    meta = RunMetadata(
        tool_version=__version__,
        seed=cfg.train.seed,
        data_seed=scenes[0].seed[0] if scenes else None,
        checkpoint=checkpoint,
        scenes=len(scenes),
        use_sb=opts.use_sb,
        class_aware=opts.class_aware,
        iou_thr=opts.iou_thr,
        field_variant=params.spec.variant,
        field_mode=params.spec.field_mode,
    )
    report = build_report(records, scenes, opts, meta, [p.interactive_count for p in predictions])
    return Evaluation(report, predictions, records)


def score_predictions(
    records: Sequence[DetectionRecord],
    scenes: Sequence[Scene],
    opts: EvalOptions,
    *,
    source: str | None = None,
) -> EvalReport:
    """Score an external prediction file; records without S_b rank by their mean verb score."""
    known = {s.index for s in scenes}
    stray = sorted({r.scene for r in records} - known)
    if stray:
        raise DataError(f"predictions reference unknown scene(s): {stray[:5]}")
    meta = RunMetadata(
        tool_version=__version__,
        seed=scenes[0].seed[0] if scenes else 0,
        data_seed=scenes[0].seed[0] if scenes else None,
        checkpoint=source,
        scenes=len(scenes),
        use_sb=any(r.s_b is not None for r in records),
        class_aware=opts.class_aware,
        iou_thr=opts.iou_thr,
    )
    return build_report(records, scenes, opts, meta)


__all__ = [
    "Evaluation",
    "build_report",
    "evaluate",
    "predict_scenes",
    "read_predictions",
    "score_predictions",
    "to_records",
    "write_predictions",
]
