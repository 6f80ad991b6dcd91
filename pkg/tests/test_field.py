import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from ifield.engine import Value, gradcheck
from ifield.errors import DegenerateFieldWarning
from ifield.field import (
    AttentionParams,
    ClusterSettings,
    FieldParams,
    FieldState,
    PairFeatures,
    ProbeParams,
    attention_cluster,
    energy,
    group_candidates,
    hier_init,
    interactiveness_score,
    modification_indicator,
    removal_indicator,
    run_field,
    soft_two_means,
    summary_distance,
)


def ring(n: int, radius: float = 1.0, centre=(0.0, 0.0)) -> np.ndarray:
    angles = 2 * np.pi * np.arange(n) / n
    return np.stack([centre[0] + radius * np.cos(angles), centre[1] + radius * np.sin(angles)], axis=1)


def one_outlier(n_inliers: int = 9, separation: float = 6.0) -> np.ndarray:
    return np.vstack([ring(n_inliers), [[separation, 0.0]]])


def two_means_g(init, iters=20, tol=1e-6):
    return lambda x: soft_two_means(x, init, iters=iters, tol=tol)


def best_two_partition(x: np.ndarray) -> set[int]:
    """Smaller side of the 2-partition minimizing the within-cluster sum of squares."""
    n = len(x)
    best, best_cost = None, math.inf
    for mask in itertools.product([0, 1], repeat=n - 1):
        labels = np.array((0, *mask))
        if labels.all() or not labels.any():
            continue
        cost = sum(((x[labels == k] - x[labels == k].mean(axis=0)) ** 2).sum() for k in (0, 1))
        if cost < best_cost:
            best, best_cost = labels, cost
    side = set(np.flatnonzero(best == 1))
    rest = set(range(n)) - side
    return min(side, rest, key=len)


class TestPairFeatures:
    def test_validates_shape_and_values(self):
        with pytest.raises(ValueError):
            PairFeatures(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            PairFeatures(np.zeros((3, 1)))
        with pytest.raises(ValueError):
            PairFeatures(np.array([[0.0, np.inf]]))
        f = PairFeatures(np.zeros((4, 3)), group_key=7)
        assert (f.n, f.dim, f.group_key) == (4, 3, 7)


class TestHierInit:
    def test_well_separated_masses(self):
        x = np.vstack([np.zeros((2, 3)), np.full((5, 3), 4.0)])
        c_s, c_l = hier_init(x)
        np.testing.assert_allclose(c_s, np.zeros(3))
        np.testing.assert_allclose(c_l, np.full(3, 4.0))

    def test_matches_exhaustive_partition_on_clear_splits(self):
        rng = np.random.default_rng(3)
        for n in range(3, 9):
            small = int(rng.integers(1, (n + 1) // 2))
            x = rng.normal(0.0, 0.1, size=(n, 2))
            x[:small] += 5.0
            c_s, _ = hier_init(x)
            minority = best_two_partition(x)
            np.testing.assert_allclose(c_s, x[sorted(minority)].mean(axis=0))

    def test_identical_points(self):
        x = np.ones((4, 2))
        c_s, c_l = hier_init(x)
        np.testing.assert_array_equal(c_s, np.ones(2))
        np.testing.assert_array_equal(c_l, np.ones(2))

    def test_two_points_are_the_centroids(self):
        x = np.array([[0.0, 1.0], [2.0, 3.0]])
        c_s, c_l = hier_init(x)
        np.testing.assert_array_equal(c_s, x[0])
        np.testing.assert_array_equal(c_l, x[1])


class TestSoftTwoMeans:
    def test_planted_minority_is_recovered(self):
        x = one_outlier()
        state = soft_two_means(x, hier_init(x))
        assert state.a_s.data[-1] > 0.99
        assert np.all(state.a_s.data[:-1] < 0.5)

    def test_identical_features_split_evenly(self):
        x = np.full((5, 3), 2.0)
        state = soft_two_means(x, hier_init(x))
        np.testing.assert_allclose(state.a_s.data, 0.5)
        np.testing.assert_allclose(state.a_l.data, 0.5)

    def test_one_iteration_from_planted_means_separates(self):
        x = np.array([[0.0, 0.0], [0.2, 0.0], [4.0, 0.0], [4.2, 0.0]])
        state = soft_two_means(x, (np.array([0.1, 0.0]), np.array([4.1, 0.0])), iters=1)
        assert np.all(state.a_s.data[:2] > 0.5)
        assert np.all(state.a_s.data[2:] < 0.5)

    def test_assignments_sum_to_one(self):
        x = np.random.default_rng(0).normal(size=(7, 4))
        state = soft_two_means(x, hier_init(x))
        np.testing.assert_allclose(state.a_s.data + state.a_l.data, 1.0)

    def test_iterations_must_be_positive(self):
        with pytest.raises(ValueError):
            soft_two_means(np.eye(3), hier_init(np.eye(3)), iters=0)

    def test_translation_invariant(self):
        x = one_outlier()
        shift = np.array([3.0, -7.0])
        a = soft_two_means(x, hier_init(x))
        b = soft_two_means(x + shift, hier_init(x + shift))
        np.testing.assert_allclose(a.a_s.data, b.a_s.data, atol=1e-6)

    def test_row_permutation_equivariant(self):
        x = one_outlier()
        perm = np.random.default_rng(5).permutation(len(x))
        a = soft_two_means(x, hier_init(x))
        b = soft_two_means(x[perm], hier_init(x[perm]))
        np.testing.assert_allclose(a.a_s.data[perm], b.a_s.data, atol=1e-6)


class TestAttentionCluster:
    def test_identity_projections_follow_alignment(self):
        x = np.eye(2)
        state = attention_cluster(x, (x[0], x[1]), AttentionParams.identity(2))
        assert state.a_s.data[0] > 0.5
        assert state.a_l.data[1] > 0.5

    def test_zero_projections_give_even_split(self):
        x = np.random.default_rng(1).normal(size=(5, 3))
        state = attention_cluster(x, hier_init(x), AttentionParams.zeros(3, heads=2, head_dim=2))
        np.testing.assert_allclose(state.a_s.data, 0.5)
        np.testing.assert_allclose(state.a_l.data, 0.5)

    def test_dimension_mismatch_rejected(self):
        x = np.ones((3, 4))
        with pytest.raises(ValueError):
            attention_cluster(x, hier_init(x), AttentionParams.identity(3))

    def test_gradient_wrt_projections(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(6, 4))
        init = hier_init(x)
        base = AttentionParams.initialise(4, 2, 3, rng, requires_grad=False)
        weights = rng.normal(size=6)

        def f(wq):
            params = AttentionParams([wq, base.query[1]], base.key, base.value, base.out)
            return (attention_cluster(x, init, params).a_s * weights).sum()

        report = gradcheck(f, base.query[0].data)
        assert report.passed, report.message


class TestEnergy:
    def test_symmetric_state(self):
        half = Value(np.full(3, 0.5))
        state = FieldState(Value(np.zeros(2)), Value(np.zeros(2)), half, half)
        assert energy(state, 1) == 0.5

    def test_sums_to_total_mass(self):
        x = one_outlier()
        state = soft_two_means(x, hier_init(x))
        assert sum(energy(state, i) for i in range(state.n)) == pytest.approx(state.a_s.data.sum())
        assert energy(state, len(x) - 1) > 0.99

    def test_reads_the_small_cluster_assignment(self):
        a_s = Value(np.array([0.9, 0.2, 0.4]))
        state = FieldState(Value(np.zeros(2)), Value(np.zeros(2)), a_s, 1.0 - a_s)
        assert [energy(state, i) for i in range(3)] == [0.9, 0.2, 0.4]

    def test_index_out_of_range(self):
        half = Value(np.full(3, 0.5))
        state = FieldState(Value(np.zeros(2)), Value(np.zeros(2)), half, half)
        with pytest.raises(IndexError):
            energy(state, 3)


class TestIndicators:
    def test_outlier_dominates_both_indicators(self):
        x = one_outlier()
        g = two_means_g(hier_init(x))
        d_r = removal_indicator(x, g).data
        d_m = modification_indicator(x, g).data
        assert int(np.argmax(d_r)) == len(x) - 1
        assert int(np.argmax(d_m)) == len(x) - 1
        assert np.all(d_r >= 0) and np.all(d_m >= 0)

    def test_duplicate_removal_barely_moves_summary(self):
        # tight cluster around the origin holding the origin twice
        x = np.vstack([ring(6, radius=0.01), [[0.0, 0.0], [0.0, 0.0]], [[8.0, 0.0], [8.5, 0.0]]])
        g = two_means_g(hier_init(x))
        d_r = removal_indicator(x, g).data
        assert d_r[7] < 1e-2
        assert d_r[7] < 0.1 * d_r[-1]

    def test_identical_points_give_zeros(self):
        x = np.ones((4, 3))
        g = two_means_g(hier_init(x))
        np.testing.assert_allclose(removal_indicator(x, g).data, 0.0, atol=1e-12)
        np.testing.assert_allclose(modification_indicator(x, g).data, 0.0, atol=1e-12)

    def test_removal_needs_three_pairs(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]])
        with pytest.warns(DegenerateFieldWarning):
            d_r = removal_indicator(x, two_means_g(hier_init(x)))
        np.testing.assert_array_equal(d_r.data, [0.0, 0.0])

    def test_row_at_the_mean_has_zero_modification(self):
        x = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 5.0], [0.0, -5.0]])
        d_m = modification_indicator(x, two_means_g(hier_init(x))).data
        assert d_m[2] == 0.0

    def test_modification_replaces_the_row_with_the_field_mean(self):
        x = one_outlier(5)
        g = two_means_g(hier_init(x))
        d_m = modification_indicator(x, g).data
        replaced = x.copy()
        replaced[2] = x.mean(axis=0)
        expected = summary_distance(g(x), g(replaced)).data
        assert d_m[2] == pytest.approx(float(expected), rel=1e-9)

    def test_two_symmetric_points_have_equal_modification(self):
        x = np.array([[-1.0, 0.0], [1.0, 0.0]])
        d_m = modification_indicator(x, two_means_g(hier_init(x))).data
        assert d_m[0] == pytest.approx(d_m[1], rel=1e-9)

    def test_outlier_detection_rate(self):
        rng = np.random.default_rng(11)
        hits = 0
        trials = 50
        for _ in range(trials):
            n = int(rng.integers(4, 10))
            x = rng.normal(0.0, 1.0, size=(n, 3))
            x[0] += np.array([6.0, 0.0, 0.0])
            g = two_means_g(hier_init(x))
            d_r = removal_indicator(x, g).data
            d_m = modification_indicator(x, g).data
            hits += int(np.argmax(d_r) == 0 and np.argmax(d_m) == 0)
        assert hits >= 0.9 * trials


class TestInteractivenessScore:
    def test_closed_form_corners(self):
        zeros = np.zeros(1)
        assert interactiveness_score(np.ones(1), zeros, zeros)[0] == 0.5
        assert interactiveness_score(zeros, zeros, zeros)[0] == 0.0
        assert interactiveness_score(np.ones(1), np.full(1, 1e3), np.full(1, 1e3))[0] == pytest.approx(1.0)

    def test_rejects_negative_indicators(self):
        with pytest.raises(ValueError):
            interactiveness_score(np.ones(2), np.array([0.1, -0.1]), np.zeros(2))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            interactiveness_score(np.ones(2), np.zeros(3), np.zeros(2))

    @hyp_settings(max_examples=300, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1e6), st.floats(0.0, 1e6)),
            min_size=1,
            max_size=16,
        )
    )
    def test_bounded(self, rows):
        a, d_r, d_m = (np.array(col) for col in zip(*rows))
        s_b = interactiveness_score(a, d_r, d_m)
        assert np.all((s_b >= 0.0) & (s_b <= 1.0))


class TestGrouping:
    def test_instance_groups_and_category_pool(self):
        # object 0 has 3 candidates, objects 1 and 2 share class 5 with 2 and 1
        objects = [0, 0, 0, 1, 1, 2]
        classes = [4, 4, 4, 5, 5, 5]
        groups = group_candidates(objects, classes)
        assert [(g.kind, g.key, g.indices) for g in groups] == [
            ("instance", 0, (0, 1, 2)),
            ("category", 5, (3, 4, 5)),
        ]

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            group_candidates([0, 1], [0])


class TestRunField:
    def test_single_pair_is_degenerate(self):
        out = run_field(Value(np.ones((1, 3))), "clustering", FieldParams())
        assert out.degenerate
        np.testing.assert_array_equal(out.scores(), [0.25])

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            run_field(Value(np.eye(3)), "kmeans", FieldParams())

    def test_attention_needs_parameters(self):
        with pytest.raises(ValueError):
            run_field(Value(np.eye(3)), "attention", FieldParams())

    def test_minority_cluster_is_interactive(self):
        x = one_outlier()
        out = run_field(Value(x), "clustering", FieldParams(), ClusterSettings())
        assert out.interactive.data[-1] > 0.99
        scores = out.scores()
        assert int(np.argmax(scores)) == len(x) - 1
        assert np.all((scores >= 0) & (scores <= 1))

    def test_fc_probe_variant(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 3))
        probe = ProbeParams.initialise(3, rng)
        out = run_field(Value(x), "fc", FieldParams(probe=probe), indicators=False)
        np.testing.assert_allclose(out.state.a_s.data + out.state.a_l.data, 1.0)
        np.testing.assert_array_equal(out.d_r.data, np.zeros(5))

    def test_two_pairs_warn_and_skip_removal(self):
        x = Value(np.array([[0.0, 0.0], [1.0, 1.0]]))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = run_field(x, "clustering", FieldParams())
        assert any(issubclass(w.category, DegenerateFieldWarning) for w in caught)
        np.testing.assert_array_equal(out.d_r.data, [0.0, 0.0])


@pytest.mark.slow
def test_outlier_identified_in_500_trials():
    rng = np.random.default_rng(2024)
    hits = 0
    for _ in range(500):
        n = int(rng.integers(4, 12))
        c = int(rng.integers(2, 6))
        x = rng.normal(0.0, 1.0, size=(n, c))
        outlier = int(rng.integers(n))
        direction = rng.normal(size=c)
        x[outlier] = x[np.arange(n) != outlier].mean(axis=0) + 6.0 * direction / np.linalg.norm(direction)
        g = two_means_g(hier_init(x))
        hits += int(np.argmax(removal_indicator(x, g).data) == outlier and np.argmax(modification_indicator(x, g).data) == outlier)
    assert hits >= 0.99 * 500
