"""Training trends on a small synthetic benchmark (150 training / 80 test scenes).

Every model here is trained once per module and shared between tests.
"""

import functools

import numpy as np
import pytest
from scipy.special import expit

from ifield.config import build_config
from ifield.engine import Value
from ifield.eval import evaluate
from ifield.field import ClusterSettings, group_candidates, hier_init, run_field, soft_two_means
from ifield.losses import pair_terms
from ifield.matching import assign_labels
from ifield.synth import build_candidates, sample_scene
from ifield.train import TrainData, Trainer, forward
from ifield.train.model import field_params

pytestmark = pytest.mark.slow

TRAIN_SCENES = 150
TEST_SCENES = 80
RECOVERY_SCENES = 500

TREND = {
    "seed": 7,
    "generator": {"humans": [2, 6], "objects": [1, 2]},
    "field": {"heads": 2, "head_dim": 4, "iters": 10},
    "train": {
        "hidden": 24,
        "feature_dim": 8,
        "batch_size": 8,
        "lr": 0.003,
        "decay_epoch": None,
        "epochs": {"stage1": 12, "stage2": 4, "stage3": 4},
    },
}


def trend_config(variant="attention", mode="full", feature_mode="geometric", stages=(1, 2, 3)):
    return build_config(
        TREND,
        {
            "generator": {"feature_mode": feature_mode},
            "field": {"variant": variant, "mode": mode},
            "train": {"stages": list(stages)},
        },
    )


def scenes(cfg, count, offset=0):
    return [sample_scene(cfg.generator, offset + i) for i in range(count)]


@functools.lru_cache(maxsize=None)
def trained(variant="attention", mode="full", feature_mode="geometric", stages=(1, 2, 3)):
    cfg = trend_config(variant, mode, feature_mode, stages)
    data = TrainData.build(scenes(cfg, TRAIN_SCENES), cfg)
    return cfg, data, Trainer(cfg, data).fit()


@functools.lru_cache(maxsize=None)
def report_of(variant, mode, use_sb=True):
    cfg, _, params = trained(variant, mode)
    opts = cfg.eval.model_copy(update={"use_sb": use_sb})
    return evaluate(params, scenes(cfg, TEST_SCENES, offset=10_000), cfg, opts=opts).report


def encoded_groups(cfg, params, scene):
    """Encoder features, interactive flags and field groups of one scene's candidates."""
    cands = build_candidates(scene, cfg.generator)
    out = forward(params.leaves(), cands.inputs(cfg.generator.feature_mode), cands.human_boxes, cands.object_boxes)
    return out.features.data, cands.interactive, group_candidates(cands.object_idx, cands.object_class)


def planted_minority(labels):
    """Rows of the smaller planted cluster, or None when the group holds one class or two equal ones."""
    positives = int(labels.sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0 or positives == negatives:
        return None
    return labels if positives < negatives else ~labels


class TestStageOne:
    def test_boxes_fit_within_five_hundredths(self):
        cfg, data, params = trained(stages=(1,))
        errors = []
        for scene, cands in zip(data.scenes, data.candidates):
            out = forward(params.leaves(), cands.inputs("geometric"), cands.human_boxes, cands.object_boxes)
            groups = group_candidates(cands.object_idx, cands.object_class)
            labels = assign_labels(
                scene, out.human_boxes.data, out.object_boxes.data, out.class_probs(), groups, cfg.losses, cfg.generator.verbs
            )
            if not labels.targets.matched.any():
                continue
            terms = pair_terms(out.human_boxes, out.object_boxes, out.class_logits, labels.targets)
            errors.append(0.5 * (terms.reg_h.item() + terms.reg_o.item()))
        assert errors
        assert float(np.mean(errors)) < 0.05

    def test_every_stage_ends_below_its_first_epoch(self):
        _, _, params = trained()
        for stage in (1, 2, 3):
            curve = [r.loss for r in params.history if r.stage == stage]
            assert len(curve) >= 2
            assert curve[-1] < curve[0], stage


class TestFieldRecovery:
    def test_two_means_on_planted_features(self):
        cfg = trend_config(feature_mode="oracle")
        hits = total = 0
        for scene in scenes(cfg, RECOVERY_SCENES, offset=20_000):
            cands = build_candidates(scene, cfg.generator)
            for group in group_candidates(cands.object_idx, cands.object_class):
                rows = group.as_array()
                minority = planted_minority(cands.interactive[rows])
                if minority is None:
                    continue
                x = cands.oracle[rows]
                state = soft_two_means(x, hier_init(x))
                a = state.interactive_assignment().data[minority]
                hits += int((a > 0.9).sum())
                total += a.size
        assert total > 0
        assert hits >= 0.99 * total

    def test_attention_after_field_training(self):
        cfg, _, params = trained(feature_mode="oracle", stages=(1, 2))
        fparams = field_params(params.leaves(), params.spec)
        settings = ClusterSettings(cfg.field.iters, cfg.field.tol)
        hits = total = 0
        for scene in scenes(cfg, RECOVERY_SCENES, offset=20_000):
            features, interactive, groups = encoded_groups(cfg, params, scene)
            for group in groups:
                rows = group.as_array()
                minority = planted_minority(interactive[rows])
                if minority is None:
                    continue
                fo = run_field(Value(features[rows]), "attention", fparams, settings, indicators=False)
                a = fo.interactive.data[minority]
                hits += int((a > 0.9).sum())
                total += a.size
        assert total > 0
        assert hits >= 0.99 * total

    def test_removal_moves_the_field_more_for_interactive_pairs(self):
        # separable: minority-regime groups of at least three pairs holding both classes
        cfg, _, params = trained(feature_mode="oracle", stages=(1, 2))
        fparams = field_params(params.leaves(), params.spec)
        settings = ClusterSettings(cfg.field.iters, cfg.field.tol)
        wins = judged = 0
        for scene in scenes(cfg, TEST_SCENES, offset=10_000):
            if scene.regime != "minority":
                continue
            features, interactive, groups = encoded_groups(cfg, params, scene)
            pos, neg = [], []
            for group in groups:
                rows = group.as_array()
                labels = interactive[rows]
                if rows.size < 3 or labels.all() or not labels.any():
                    continue
                d_r = expit(run_field(Value(features[rows]), "attention", fparams, settings).d_r.data)
                pos.extend(d_r[labels])
                neg.extend(d_r[~labels])
            if pos and neg:
                judged += 1
                wins += int(np.mean(pos) > np.mean(neg))
        assert judged > 0
        assert wins >= 0.95 * judged


class TestAblation:
    def test_full_beats_unsupervised_beats_no_field(self):
        full = report_of("attention", "full").full.interactiveness_ap
        unsup = report_of("attention", "unsup").full.interactiveness_ap
        none = report_of("attention", "none").full.interactiveness_ap
        assert full >= unsup + 0.02
        assert unsup >= none + 0.02

    def test_dropping_sb_costs_less_than_dropping_the_field(self):
        full = report_of("attention", "full").full.interactiveness_ap
        no_sb = report_of("attention", "full", use_sb=False).full.interactiveness_ap
        none = report_of("attention", "none").full.interactiveness_ap
        assert full - no_sb < full - none

    def test_field_counts_minority_scenes_better_than_per_pair_classifier(self):
        field = report_of("attention", "full").count_error["minority"]
        per_pair = report_of("fc", "full").count_error["minority"]
        assert field <= 0.8 * per_pair
