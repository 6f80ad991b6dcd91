"""Three-stage training of the pair encoder, the field module and the verb head."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel

from ..config import RunConfig
from ..engine import Value, backward
from ..errors import TrainingDivergedError
from ..field import ClusterSettings, group_candidates, run_field
from ..losses import field_loss, field_terms, pair_terms, verb_loss
from ..matching import assign_labels
from ..run_logger import NullRunLogger
from ..synth import CandidateSet, Scene, build_candidates, descriptor_dim
from .model import ModelParams, ModelSpec, field_params, forward, init_params
from .optim import AdamW, scheduled_lr


class EpochRecord(BaseModel):
    stage: int
    epoch: int
    loss: float
    losses: dict[str, float]
    lr: float
    # kept in train_log.jsonl only; checkpoints drop it
    wall_time: float | None = None


@dataclass
class TrainData:
    scenes: list[Scene]
    candidates: list[CandidateSet]

    @classmethod
    def build(cls, scenes: Sequence[Scene], cfg: RunConfig) -> TrainData:
        return cls(list(scenes), [build_candidates(s, cfg.generator) for s in scenes])

    def __len__(self) -> int:
        return len(self.scenes)


@dataclass
class SceneLoss:
    index: int
    loss: float
    parts: dict[str, float]
    grads: dict[str, np.ndarray]


def model_spec(cfg: RunConfig) -> ModelSpec:
    return ModelSpec(
        input_dim=descriptor_dim(cfg.generator),
        hidden=cfg.train.hidden,
        feature_dim=cfg.train.feature_dim,
        num_classes=cfg.generator.object_classes,
        num_verbs=cfg.generator.verbs,
        variant=cfg.field.variant,
        field_mode=cfg.field.mode,
        heads=cfg.field.heads,
        head_dim=cfg.field.head_dim,
        feature_mode=cfg.generator.feature_mode,
    )


def initial_params(cfg: RunConfig) -> ModelParams:
    return init_params(model_spec(cfg), np.random.default_rng([cfg.train.seed, 0]))


def scene_objective(
    params: ModelParams,
    scene: Scene,
    cands: CandidateSet,
    stage: int,
    cfg: RunConfig,
    trainable: Sequence[str],
) -> tuple[Value, dict[str, float], dict[str, Value]]:
    """Total loss of one scene at ``stage`` with its components and the leaves it was built on."""
    spec = params.spec
    leaves = params.leaves(trainable)
    out = forward(leaves, cands.inputs(spec.feature_mode), cands.human_boxes, cands.object_boxes)
    groups = group_candidates(cands.object_idx, cands.object_class)
    labels = assign_labels(
        scene,
        out.human_boxes.data,
        out.object_boxes.data,
        out.class_probs(),
        groups,
        cfg.losses,
        spec.num_verbs,
    )

    pair = pair_terms(out.human_boxes, out.object_boxes, out.class_logits, labels.targets)
    total = pair.total(cfg.losses)
    parts = {"pair": total.item()}

    if stage >= 2 and cfg.field.mode != "none":
        settings = ClusterSettings(cfg.field.iters, cfg.field.tol)
        fparams = field_params(leaves, spec)
        field_total: Value = Value(0.0)
        fields = 0
        for i, group in enumerate(groups):
            if group.size < 2:
                continue
            fo = run_field(out.features[group.as_array()], spec.variant, fparams, settings)
            terms = field_terms(
                fo.state.a_s,
                fo.state.a_l,
                fo.d_r,
                fo.d_m,
                labels=labels.group_labels(group),
                n_t=labels.n_t[i],
                mode=cfg.field.mode,
            )
            field_total = field_total + field_loss(terms, cfg.losses)
            fields += 1
        if fields:
            field_total = field_total / float(fields)
        total = total + field_total
        parts["field"] = field_total.item()

    if stage >= 3:
        verb = verb_loss(out.verb_logits, labels.targets.verbs)
        total = total + verb
        parts["verb"] = verb.item()
    return total, parts, leaves


class Trainer:
    """Runs training stages over a fixed dataset.

    Per-scene losses and gradients may be computed on worker threads; the
    gradients of a batch are always reduced in scene-index order so the
    optimizer sees the same sums whatever the thread count.
    """

    def __init__(
        self,
        cfg: RunConfig,
        data: TrainData,
        *,
        threads: int = 1,
        logger: NullRunLogger | None = None,
        log_path: Path | None = None,
    ) -> None:
        self.cfg = cfg
        self.data = data
        self.threads = max(1, threads)
        self.logger = logger or NullRunLogger()
        self.log_path = log_path

    # ------------------------------------------------------------ internals
    def _scene_loss(self, params: ModelParams, index: int, stage: int, epoch: int, trainable: Sequence[str]) -> SceneLoss:
        total, parts, leaves = scene_objective(
            params, self.data.scenes[index], self.data.candidates[index], stage, self.cfg, trainable
        )
        if not math.isfinite(total.item()):
            raise TrainingDivergedError(stage, epoch, f"loss of scene {self.data.scenes[index].index}")
        grad_map = backward(total)
        grads = {
            name: grad_map.get(leaves[name].uid, np.zeros_like(params.arrays[name]))
            for name in trainable
        }
        return SceneLoss(index, total.item(), parts, grads)

    def _batch(self, params: ModelParams, batch: Sequence[int], stage: int, epoch: int, trainable: Sequence[str], pool) -> list[SceneLoss]:
        def job(i: int) -> SceneLoss:
            return self._scene_loss(params, i, stage, epoch, trainable)

        results = list(pool.map(job, batch)) if pool is not None else [job(i) for i in batch]
        return sorted(results, key=lambda r: r.index)

    def _log(self, record: EpochRecord) -> None:
        self.logger.on_epoch_end(record)
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(record.model_dump_json() + "\n")

    # ------------------------------------------------------------------- api
    def run_stage(self, stage: int, params: ModelParams) -> ModelParams:
        tcfg = self.cfg.train
        epochs = tcfg.epochs.of(stage)
        trainable = params.trainable(stage)
        optimizer = AdamW(betas=tcfg.betas, eps=tcfg.eps, weight_decay=tcfg.weight_decay)
        order_rng = np.random.default_rng([tcfg.seed, stage])
        n = len(self.data)
        self.logger.on_stage_start(stage, epochs, n)

        final: float | None = None
        pool = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None
        try:
            for epoch in range(epochs):
                started = time.perf_counter()
                lr = scheduled_lr(tcfg.lr, epoch, tcfg.decay_epoch, tcfg.lr_decay)
                order = order_rng.permutation(n)
                losses: list[float] = []
                parts: dict[str, list[float]] = {}
                for start in range(0, n, tcfg.batch_size):
                    batch = [int(i) for i in order[start : start + tcfg.batch_size]]
                    results = self._batch(params, batch, stage, epoch + 1, trainable, pool)
                    grads = {}
                    for name in trainable:
                        acc = np.zeros_like(params.arrays[name])
                        for r in results:
                            acc = acc + r.grads[name]
                        grads[name] = acc / float(len(results))
                    optimizer.step(params.arrays, grads, lr)
                    bad = params.all_finite()
                    if bad is not None:
                        raise TrainingDivergedError(stage, epoch + 1, f"parameter {bad}")
                    for r in results:
                        losses.append(r.loss)
                        for key, value in r.parts.items():
                            parts.setdefault(key, []).append(value)
                record = EpochRecord(
                    stage=stage,
                    epoch=epoch + 1,
                    loss=math.fsum(losses) / max(len(losses), 1),
                    losses={k: math.fsum(v) / len(v) for k, v in parts.items()},
                    lr=lr,
                    wall_time=time.perf_counter() - started,
                )
                params.history.append(record)
                self._log(record)
                final = record.loss
        finally:
            if pool is not None:
                pool.shutdown()
        params.stage = stage
        self.logger.on_stage_end(stage, final)
        return params

    def fit(
        self,
        params: ModelParams | None = None,
        stages: Sequence[int] | None = None,
        on_stage_end: Callable[[int, ModelParams], None] | None = None,
    ) -> ModelParams:
        params = params or initial_params(self.cfg)
        for stage in stages or self.cfg.train.stages:
            params = self.run_stage(stage, params)
            if on_stage_end is not None:
                on_stage_end(stage, params)
        return params


def train_stage1(data: TrainData, cfg: RunConfig, **kwargs) -> ModelParams:
    """Encoder and box/class heads with L_pair on matched targets."""
    return Trainer(cfg, data, **kwargs).run_stage(1, initial_params(cfg))


def train_stage2(params: ModelParams, data: TrainData, cfg: RunConfig, **kwargs) -> ModelParams:
    """Field module joins; L_pair + L_field."""
    return Trainer(cfg, data, **kwargs).run_stage(2, params)


def train_stage3(params: ModelParams, data: TrainData, cfg: RunConfig, **kwargs) -> ModelParams:
    """Verb head joins; L_pair + L_field + L_verb."""
    return Trainer(cfg, data, **kwargs).run_stage(3, params)


__all__ = [
    "EpochRecord",
    "SceneLoss",
    "TrainData",
    "Trainer",
    "initial_params",
    "model_spec",
    "scene_objective",
    "train_stage1",
    "train_stage2",
    "train_stage3",
]
