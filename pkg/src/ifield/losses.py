"""Training objectives: field losses (cardinality, rank, clustering, cross-entropy) and pair losses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, NonNegativeFloat

from .engine import Value, as_value
from .geometry import giou_values

EPS = 1e-7

Role = Literal["s", "l"]
FieldMode = Literal["full", "unsup", "card_only", "change_only", "none"]
FIELD_MODES: tuple[str, ...] = ("full", "unsup", "card_only", "change_only", "none")


class LossWeights(BaseModel):
    """Weights of the pair losses (lambda1..3) and of the field loss terms (lambda4..6, lambda_r)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda1: NonNegativeFloat = 1.0
    lambda2: NonNegativeFloat = 2.5
    lambda3: NonNegativeFloat = 1.0
    lambda4: NonNegativeFloat = 1.0
    lambda5: NonNegativeFloat = 1.0
    lambda6: NonNegativeFloat = 1.0
    lambda_r: NonNegativeFloat = 1.0


def _labels(labels: Sequence[int] | np.ndarray, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"expected {n} labels, got {y.shape[0]}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("interactiveness labels must be binary")
    return y


def _check_pair(a_s: Value, a_l: Value) -> None:
    if a_s.shape != a_l.shape:
        raise ValueError(f"assignment shapes differ: {a_s.shape} vs {a_l.shape}")


# ------------------------------------------------------------------ field


def card_loss(a_s, a_l, n_t: float | None = None, *, role: Role = "s") -> Value:
    """Cardinality loss.

    Unsupervised: sum(A_s) - sum(A_l). With ``n_t`` the count of the cluster
    carrying the interactive role is bound to it by |n_T - sum(A_role)|.
    """
    a_s, a_l = as_value(a_s), as_value(a_l)
    _check_pair(a_s, a_l)
    loss = a_s.sum() - a_l.sum()
    if n_t is None:
        return loss
    n = a_s.shape[0]
    if not 0 <= n_t <= n:
        raise ValueError(f"n_T must lie in [0, {n}], got {n_t}")
    bound = a_s if role == "s" else a_l
    return loss + (float(n_t) - bound.sum()).abs()


def rank_loss(d, a_s, a_l) -> Value:
    """Raw rank loss: sum over i in P_S, j in P_L of (D_j - D_i).

    Set membership is read from the forward values and is not differentiated.
    """
    d, a_s, a_l = as_value(d), as_value(a_s), as_value(a_l)
    _check_pair(a_s, a_l)
    if d.shape != a_s.shape:
        raise ValueError(f"indicator shape {d.shape} does not match assignments {a_s.shape}")
    small = (a_s.data > a_l.data).astype(np.float64)
    large = (a_l.data > a_s.data).astype(np.float64)
    n_small, n_large = float(small.sum()), float(large.sum())
    return (d * large).sum() * n_small - (d * small).sum() * n_large


def clus_loss(a_s, a_l, labels) -> Value:
    """Pairwise clustering loss over all ordered pairs, diagonal included."""
    a_s, a_l = as_value(a_s), as_value(a_l)
    _check_pair(a_s, a_l)
    n = a_s.shape[0]
    y = _labels(labels, n)
    agree = (y[:, None] == y[None, :]).astype(np.float64)
    p = a_s.reshape(n, 1) @ a_s.reshape(1, n) + a_l.reshape(n, 1) @ a_l.reshape(1, n)
    p = p.clip(EPS, 1.0 - EPS)
    return ((agree - 1.0) * (1.0 - p).log() - agree * p.log()).sum()


def interactiveness_ce(a, labels) -> Value:
    """Mean binary cross-entropy of ``a`` as the interactive-cluster probability."""
    a = as_value(a)
    y = _labels(labels, a.shape[0])
    p = a.clip(EPS, 1.0 - EPS)
    return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).mean()


def correspondence(a_s, a_l, labels) -> Role:
    """Pick the cluster whose assignment best explains the labels; ties go to P_S."""
    a_s, a_l = as_value(a_s), as_value(a_l)
    ce_s = interactiveness_ce(a_s.detach(), labels).item()
    ce_l = interactiveness_ce(a_l.detach(), labels).item()
    return "l" if ce_l < ce_s else "s"


@dataclass
class FieldLossTerms:
    card: Value
    ce: Value
    clus: Value
    rank_r: Value
    rank_m: Value
    role: Role = "s"

    def as_dict(self) -> dict[str, float]:
        return {
            "card": self.card.item(),
            "ce": self.ce.item(),
            "clus": self.clus.item(),
            "rank_r": self.rank_r.item(),
            "rank_m": self.rank_m.item(),
        }


def _zero() -> Value:
    return Value(0.0)


def field_terms(
    a_s,
    a_l,
    d_r,
    d_m,
    labels=None,
    n_t: float | None = None,
    mode: FieldMode = "full",
) -> FieldLossTerms:
    """Evaluate every field-loss component of one group under ``mode``.

    ``unsup`` drops the label-bound terms, ``card_only`` the rank terms and
    ``change_only`` the cardinality term; ``none`` yields all zeros.
    """
    if mode not in FIELD_MODES:
        raise ValueError(f"unknown field mode '{mode}'")
    a_s, a_l = as_value(a_s), as_value(a_l)
    if mode == "none":
        return FieldLossTerms(_zero(), _zero(), _zero(), _zero(), _zero())

    supervised = mode != "unsup" and labels is not None
    role: Role = correspondence(a_s, a_l, labels) if supervised else "s"

    if mode == "change_only":
        card = _zero()
    elif supervised:
        card = card_loss(a_s, a_l, n_t, role=role)
    else:
        card = card_loss(a_s, a_l)

    if supervised:
        ce = interactiveness_ce(a_s if role == "s" else a_l, labels)
        clus = clus_loss(a_s, a_l, labels)
    else:
        ce, clus = _zero(), _zero()

    if mode == "card_only":
        rank_r, rank_m = _zero(), _zero()
    else:
        rank_r, rank_m = rank_loss(d_r, a_s, a_l), rank_loss(d_m, a_s, a_l)
    return FieldLossTerms(card, ce, clus, rank_r, rank_m, role)


def field_loss(terms: FieldLossTerms, w: LossWeights) -> Value:
    """L_field = l4 L_card + l5 L_ce + l6 L_clus + l_r (L_rank^r + L_rank^m)."""
    return (
        w.lambda4 * terms.card
        + w.lambda5 * terms.ce
        + w.lambda6 * terms.clus
        + w.lambda_r * (terms.rank_r + terms.rank_m)
    )


# ------------------------------------------------------------------- pair


@dataclass
class PairTargets:
    """Per-prediction targets after matching; ``matched`` rows carry boxes, the rest are no-object."""

    matched: np.ndarray
    human_boxes: np.ndarray
    object_boxes: np.ndarray
    classes: np.ndarray
    verbs: np.ndarray


@dataclass
class PairLossTerms:
    giou_h: Value
    giou_o: Value
    reg_h: Value
    reg_o: Value
    cls: Value

    def total(self, w: LossWeights) -> Value:
        return (
            w.lambda1 * (self.giou_h + self.giou_o)
            + w.lambda2 * (self.reg_h + self.reg_o)
            + w.lambda3 * self.cls
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "giou_h": self.giou_h.item(),
            "giou_o": self.giou_o.item(),
            "reg_h": self.reg_h.item(),
            "reg_o": self.reg_o.item(),
            "cls": self.cls.item(),
        }


def class_ce(logits, classes) -> Value:
    """Mean softmax cross-entropy; ``classes`` index rows of ``logits``."""
    logits = as_value(logits)
    n, k = logits.shape
    onehot = np.zeros((n, k))
    onehot[np.arange(n), np.asarray(classes, dtype=np.int64)] = 1.0
    return -(logits.log_softmax(axis=1) * onehot).sum() / float(max(n, 1))


def pair_terms(pred_h, pred_o, class_logits, targets: PairTargets) -> PairLossTerms:
    pred_h, pred_o = as_value(pred_h), as_value(pred_o)
    rows = np.flatnonzero(targets.matched)
    if rows.size:
        m = float(rows.size)
        h, o = pred_h[rows], pred_o[rows]
        th, to = targets.human_boxes[rows], targets.object_boxes[rows]
        giou_h = (1.0 - giou_values(h, th)).sum() / m
        giou_o = (1.0 - giou_values(o, to)).sum() / m
        reg_h = (h - th).abs().mean(axis=1).sum() / m
        reg_o = (o - to).abs().mean(axis=1).sum() / m
    else:
        giou_h = giou_o = reg_h = reg_o = _zero()
    return PairLossTerms(giou_h, giou_o, reg_h, reg_o, class_ce(class_logits, targets.classes))


def pair_loss(pred_h, pred_o, class_logits, targets: PairTargets, w: LossWeights) -> Value:
    """L_pair = l1 (L_giou^h + L_giou^o) + l2 (L_reg^h + L_reg^o) + l3 L_o."""
    return pair_terms(pred_h, pred_o, class_logits, targets).total(w)


def verb_loss(verb_logits, verbs) -> Value:
    """Per-verb binary cross-entropy averaged over pairs and verbs."""
    logits = as_value(verb_logits)
    y = np.asarray(verbs, dtype=np.float64)
    if y.shape != logits.shape:
        raise ValueError(f"verb targets {y.shape} do not match logits {logits.shape}")
    p = logits.sigmoid().clip(EPS, 1.0 - EPS)
    return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).mean()


__all__ = [
    "EPS",
    "FIELD_MODES",
    "FieldLossTerms",
    "FieldMode",
    "LossWeights",
    "PairLossTerms",
    "PairTargets",
    "Role",
    "card_loss",
    "class_ce",
    "clus_loss",
    "correspondence",
    "field_loss",
    "field_terms",
    "interactiveness_ce",
    "pair_loss",
    "pair_terms",
    "rank_loss",
    "verb_loss",
]
