"""Finite-difference gradient checks over every loss and field operation.

Each case draws random problems (N pairs of C-dimensional features) and
compares the engine's reverse-mode gradient against central differences.
With ``plant_defect`` the checked input is routed through ``scale_grad`` so
its gradient is deliberately wrong and every case must fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .engine import Value, gradcheck, scale_grad
from .field import AttentionParams, attention_cluster, hier_init, modification_indicator, removal_indicator, soft_two_means
from .losses import (
    LossWeights,
    PairTargets,
    card_loss,
    clus_loss,
    field_loss,
    field_terms,
    interactiveness_ce,
    pair_loss,
    rank_loss,
    verb_loss,
)
from .run_logger import NullRunLogger
from .settings import settings

STEP = 1e-5
REL_TOL = 1e-4
# Entries whose true gradient is ~0 are judged on absolute error instead.
ABS_TOL = 1e-7
DEFECT_FACTOR = 1.5
GRADCHECK_ITERS = 5

Problem = tuple[Callable[[Value], Value], np.ndarray]
CaseBuilder = Callable[[np.random.Generator, int, int], Problem]


@dataclass
class GradcheckCase:
    name: str
    passed: bool
    configs: int
    max_rel_err: float
    max_abs_err: float
    failures: list[str] = field(default_factory=list)


@dataclass
class GradcheckSuite:
    cases: list[GradcheckCase]
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def max_rel_err(self) -> float:
        return max((c.max_rel_err for c in self.cases), default=0.0)


def _probs(z: Value) -> tuple[Value, Value]:
    a_s = z.sigmoid()
    return a_s, 1.0 - a_s


def _labels(rng: np.random.Generator, n: int) -> np.ndarray:
    y = np.zeros(n, dtype=np.int64)
    y[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
    return y


def _boxes(rng: np.random.Generator, n: int) -> np.ndarray:
    centre = rng.uniform(0.3, 0.7, size=(n, 2))
    size = rng.uniform(0.1, 0.3, size=(n, 2))
    return np.concatenate([centre - size / 2, centre + size / 2], axis=1)


# ---------------------------------------------------------------- cases
def _card(rng, n, c) -> Problem:
    labels = _labels(rng, n)
    n_t = float(labels.sum())

    def f(z: Value) -> Value:
        a_s, a_l = _probs(z)
        return card_loss(a_s, a_l) + card_loss(a_s, a_l, n_t, role="s") + card_loss(a_s, a_l, n_t, role="l")

    return f, rng.normal(size=n)


def _rank(rng, n, c) -> Problem:
    a_s = Value(rng.uniform(size=n))
    a_l = 1.0 - a_s
    return (lambda d: rank_loss(d, a_s, a_l)), rng.uniform(0.1, 2.0, size=n)


def _clus(rng, n, c) -> Problem:
    labels = _labels(rng, n)

    def f(z: Value) -> Value:
        a_s, a_l = _probs(z)
        return clus_loss(a_s, a_l, labels)

    return f, rng.normal(size=n)


def _ce(rng, n, c) -> Problem:
    labels = _labels(rng, n)
    return (lambda z: interactiveness_ce(z.sigmoid(), labels)), rng.normal(size=n)


def _pair(rng, n, c) -> Problem:
    classes = int(rng.integers(2, 6))
    matched = rng.uniform(size=n) < 0.6
    matched[0] = True
    targets = PairTargets(
        matched=matched,
        human_boxes=_boxes(rng, n),
        object_boxes=_boxes(rng, n),
        classes=np.where(matched, rng.integers(0, classes, size=n), classes),
        verbs=np.zeros((n, 1)),
    )
    logits = Value(rng.normal(size=(n, classes + 1)))
    weights = LossWeights()

    def f(x: Value) -> Value:
        boxes = x.reshape(n, 8)
        return pair_loss(boxes[:, 0:4], boxes[:, 4:8], logits, targets, weights)

    x = np.concatenate([_boxes(rng, n), _boxes(rng, n)], axis=1).reshape(-1)
    return f, x


def _class_ce(rng, n, c) -> Problem:
    classes = int(rng.integers(2, 6))
    targets = PairTargets(
        matched=np.zeros(n, dtype=bool),
        human_boxes=np.zeros((n, 4)),
        object_boxes=np.zeros((n, 4)),
        classes=rng.integers(0, classes + 1, size=n),
        verbs=np.zeros((n, 1)),
    )
    h, o = Value(_boxes(rng, n)), Value(_boxes(rng, n))
    return (lambda x: pair_loss(h, o, x, targets, LossWeights())), rng.normal(size=(n, classes + 1))


def _verb(rng, n, c) -> Problem:
    verbs = (rng.uniform(size=(n, 4)) < 0.3).astype(np.float64)
    return (lambda x: verb_loss(x, verbs)), rng.normal(size=(n, 4))


def _readout(rng, n, c):
    w_a, w_c = rng.normal(size=n), rng.normal(size=2 * c)
    return lambda state: (state.a_s * w_a).sum() + (state.summary * w_c).sum()


def _attention(rng, n, c) -> Problem:
    x = rng.normal(size=(n, c))
    init = hier_init(x)
    params = AttentionParams.initialise(c, 2, max(2, c // 2), rng, requires_grad=False)
    readout = _readout(rng, n, c)
    return (lambda v: readout(attention_cluster(v, init, params))), x


def _two_means(rng, n, c) -> Problem:
    x = rng.normal(size=(n, c))
    init = hier_init(x)
    readout = _readout(rng, n, c)
    return (lambda v: readout(soft_two_means(v, init, iters=GRADCHECK_ITERS, tol=0.0))), x


def _field_total(rng, n, c) -> Problem:
    x = rng.normal(size=(n, c))
    init = hier_init(x)
    params = AttentionParams.initialise(c, 2, max(2, c // 2), rng, requires_grad=False)
    labels = _labels(rng, n)
    d_r, d_m = Value(rng.uniform(0.0, 1.0, size=n)), Value(rng.uniform(0.0, 1.0, size=n))
    weights = LossWeights()

    def f(v: Value) -> Value:
        state = attention_cluster(v, init, params)
        terms = field_terms(state.a_s, state.a_l, d_r, d_m, labels=labels, n_t=float(labels.sum()))
        return field_loss(terms, weights)

    return f, x


def _indicators(rng, n, c) -> Problem:
    x = rng.normal(size=(n, c))
    init = hier_init(x)
    w_r, w_m = rng.normal(size=n), rng.normal(size=n)

    def g(v: Value):
        return soft_two_means(v, init, iters=GRADCHECK_ITERS, tol=0.0)

    def f(v: Value) -> Value:
        return (removal_indicator(v, g) * w_r).sum() + (modification_indicator(v, g) * w_m).sum()

    return f, x


# name -> (builder, uses the smaller indicator budget)
CASES: dict[str, tuple[CaseBuilder, bool]] = {
    "card_loss": (_card, False),
    "rank_loss": (_rank, False),
    "clus_loss": (_clus, False),
    "interactiveness_ce": (_ce, False),
    "pair_loss.boxes": (_pair, False),
    "pair_loss.classes": (_class_ce, False),
    "verb_loss": (_verb, False),
    "attention_cluster": (_attention, False),
    "soft_two_means": (_two_means, False),
    "field_loss": (_field_total, False),
    "indicators": (_indicators, True),
}


def run_case(
    name: str,
    configs: int,
    *,
    seed: int = 0,
    plant_defect: bool = False,
    sizes: tuple[tuple[int, int], tuple[int, int]] = ((3, 16), (4, 16)),
) -> GradcheckCase:
    builder, _ = CASES[name]
    (n_lo, n_hi), (c_lo, c_hi) = sizes
    rng = np.random.default_rng([seed, sorted(CASES).index(name)])
    worst_rel = worst_abs = 0.0
    failures: list[str] = []
    for k in range(configs):
        n = int(rng.integers(n_lo, n_hi + 1))
        c = int(rng.integers(c_lo, c_hi + 1))
        f, x = builder(rng, n, c)
        checked = (lambda v, f=f: f(scale_grad(v, DEFECT_FACTOR))) if plant_defect else f
        report = gradcheck(checked, x, STEP, REL_TOL, atol=ABS_TOL)
        if np.isfinite(report.max_rel_err):
            worst_rel = max(worst_rel, report.max_rel_err)
            worst_abs = max(worst_abs, report.max_abs_err)
        if not report.passed:
            failures.append(f"config {k} (N={n}, C={c}): {report.message}")
    return GradcheckCase(name, not failures, configs, worst_rel, worst_abs, failures)


def run_suite(
    *,
    configs: int | None = None,
    indicator_configs: int | None = None,
    seed: int = 0,
    plant_defect: bool = False,
    names: Sequence[str] | None = None,
    logger: NullRunLogger | None = None,
) -> GradcheckSuite:
    """Run every registered case; the leave-one-out indicators use N <= 8."""
    configs = configs or settings.gradcheck_configs
    indicator_configs = indicator_configs or settings.gradcheck_indicator_configs
    logger = logger or NullRunLogger()
    started = time.perf_counter()
    cases = []
    for name in names or CASES:
        if name not in CASES:
            raise ValueError(f"unknown gradcheck case '{name}'")
        small = CASES[name][1]
        case = run_case(
            name,
            indicator_configs if small else configs,
            seed=seed,
            plant_defect=plant_defect,
            sizes=((3, 8), (4, 8)) if small else ((3, 16), (4, 16)),
        )
        logger.on_gradcheck(case)
        cases.append(case)
    return GradcheckSuite(cases, time.perf_counter() - started)


__all__ = ["CASES", "GradcheckCase", "GradcheckSuite", "run_case", "run_suite"]
