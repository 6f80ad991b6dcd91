from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from ifield.engine import Value, gradcheck
from ifield.geometry import Box, giou, giou_array, giou_values, iou, iou_array, pairwise_nms


@dataclass
class Pred:
    human_box: Box
    object_box: Box
    object_class: int
    s: float

    @property
    def score(self) -> float:
        return self.s


UNIT = Box(0.0, 0.0, 1.0, 1.0)


def test_box_rejects_degenerate_and_out_of_range():
    with pytest.raises(ValueError):
        Box(0.5, 0.1, 0.5, 0.9)
    with pytest.raises(ValueError):
        Box(0.0, 0.0, 1.2, 0.5)
    with pytest.raises(ValueError):
        Box(float("nan"), 0.0, 0.5, 0.5)


def test_clipped_repairs_regression_output():
    box = Box.clipped([1.2, -0.1, 0.4, 0.4])
    assert box == Box(0.4, 0.0, 1.0, 0.4)
    tiny = Box.clipped([0.5, 0.5, 0.5, 0.5])
    assert tiny.area > 0


def test_iou_hand_cases():
    assert iou(UNIT, UNIT) == 1.0
    assert iou(Box(0.0, 0.0, 0.4, 0.4), Box(0.5, 0.5, 1.0, 1.0)) == 0.0
    assert iou(UNIT, Box(0.5, 0.0, 1.0, 1.0)) == pytest.approx(0.5)


def test_giou_hand_cases():
    assert giou(UNIT, UNIT) == 1.0
    assert giou(Box(0.0, 0.0, 0.5, 1.0), Box(0.5, 0.0, 1.0, 1.0)) == pytest.approx(0.0)
    inner = Box(0.2, 0.2, 0.6, 0.6)
    assert giou(UNIT, inner) == pytest.approx(iou(UNIT, inner))


boxes = st.builds(
    lambda x, y, w, h: Box(x, y, min(1.0, x + w), min(1.0, y + h)),
    st.floats(0.0, 0.8),
    st.floats(0.0, 0.8),
    st.floats(0.05, 0.5),
    st.floats(0.05, 0.5),
)


@hyp_settings(max_examples=200, deadline=None)
@given(boxes, boxes)
def test_iou_giou_symmetric_and_ordered(a, b):
    assert iou(a, b) == pytest.approx(iou(b, a))
    assert giou(a, b) == pytest.approx(giou(b, a))
    assert giou(a, b) <= iou(a, b) + 1e-12
    assert 0.0 <= iou(a, b) <= 1.0
    assert -1.0 < giou(a, b) <= 1.0


def test_array_forms_agree_with_scalar_forms():
    rng = np.random.default_rng(0)
    a = [Box.clipped(rng.uniform(0, 1, 4)) for _ in range(4)]
    b = [Box.clipped(rng.uniform(0, 1, 4)) for _ in range(3)]
    arr_a = np.array([x.as_array() for x in a])
    arr_b = np.array([x.as_array() for x in b])
    expected_iou = np.array([[iou(x, y) for y in b] for x in a])
    expected_giou = np.array([[giou(x, y) for y in b] for x in a])
    np.testing.assert_allclose(iou_array(arr_a, arr_b), expected_iou)
    np.testing.assert_allclose(giou_array(arr_a, arr_b), expected_giou)


def test_giou_values_row_wise_and_differentiable():
    rng = np.random.default_rng(1)
    # no coordinate shared with its target, so every min/max is off its kink
    pred = np.array([[0.12, 0.15, 0.52, 0.63], [0.3, 0.2, 0.9, 0.7]])
    target = np.array([[0.2, 0.1, 0.6, 0.5], [0.0, 0.3, 0.4, 0.8]])
    values = giou_values(Value(pred), target).data
    np.testing.assert_allclose(values, np.diag(giou_array(pred, target)))
    weights = rng.normal(size=2)
    report = gradcheck(lambda v: (giou_values(v, target) * weights).sum(), pred)
    assert report.passed, report.message


class TestPairwiseNms:
    def test_single_prediction_unchanged(self):
        p = Pred(UNIT, UNIT, 0, 0.3)
        assert pairwise_nms([p]) == [p]

    def test_empty(self):
        assert pairwise_nms([]) == []

    def test_duplicate_same_class_suppressed(self):
        hi, lo = Pred(UNIT, UNIT, 1, 0.9), Pred(UNIT, UNIT, 1, 0.8)
        assert pairwise_nms([lo, hi]) == [hi]

    def test_duplicate_other_class_kept(self):
        a, b = Pred(UNIT, UNIT, 0, 0.9), Pred(UNIT, UNIT, 1, 0.8)
        assert pairwise_nms([a, b]) == [a, b]

    def test_object_overlap_alone_does_not_suppress(self):
        a = Pred(Box(0.0, 0.0, 0.3, 0.3), UNIT, 0, 0.9)
        b = Pred(Box(0.6, 0.6, 1.0, 1.0), UNIT, 0, 0.8)
        assert len(pairwise_nms([a, b])) == 2

    def test_threshold_is_strict(self):
        # human IoU exactly 0.5 does not suppress at 0.5
        a = Pred(Box(0.0, 0.0, 1.0, 1.0), UNIT, 0, 0.9)
        b = Pred(Box(0.0, 0.0, 0.5, 1.0), UNIT, 0, 0.8)
        assert len(pairwise_nms([a, b], 0.5)) == 2

    def test_equal_scores_keep_input_order(self):
        a, b = Pred(UNIT, UNIT, 0, 0.5), Pred(UNIT, UNIT, 0, 0.5)
        assert pairwise_nms([a, b])[0] is a

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            pairwise_nms([], 1.0)


def _random_preds(rng: np.random.Generator, n: int) -> list[Pred]:
    anchors = [Box.clipped(rng.uniform(0, 1, 4)) for _ in range(3)]

    def near(box: Box) -> Box:
        return Box.clipped(box.as_array() + rng.normal(0, 0.05, 4))

    return [
        Pred(near(anchors[rng.integers(3)]), near(anchors[rng.integers(3)]), int(rng.integers(2)), float(rng.integers(0, 5)) / 4)
        for _ in range(n)
    ]


@hyp_settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 12))
def test_nms_idempotent_subset_keeps_max(seed, n):
    preds = _random_preds(np.random.default_rng(seed), n)
    once = pairwise_nms(preds)
    assert pairwise_nms(once) == once
    assert all(any(p is q for q in preds) for p in once)
    if preds:
        assert once[0].score == max(p.score for p in preds)
    assert [p.score for p in once] == sorted((p.score for p in once), reverse=True)
