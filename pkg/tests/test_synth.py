import numpy as np
import pytest

from ifield.config import REGIMES, GeneratorConfig, regime_of
from ifield.errors import DataError
from ifield.geometry import Box
from ifield.synth import (
    GtPair,
    Scene,
    SceneObject,
    build_candidates,
    build_manifest,
    descriptor_dim,
    generate_dataset,
    read_scenes,
    sample_regime,
    sample_scene,
    write_scenes,
)


@pytest.fixture
def cfg():
    return GeneratorConfig(seed=11)


class TestScene:
    def test_rejects_unknown_regime(self):
        with pytest.raises(ValueError):
            Scene([Box(0.0, 0.0, 0.1, 0.1)], [], [], "rare")

    def test_rejects_duplicate_and_dangling_pairs(self):
        humans = [Box(0.0, 0.0, 0.1, 0.1)]
        objects = [SceneObject(Box(0.2, 0.2, 0.3, 0.3), 0)]
        with pytest.raises(ValueError):
            Scene(humans, objects, [GtPair(0, 0, (0,)), GtPair(0, 0, (1,))], "majority")
        with pytest.raises(ValueError):
            Scene(humans, objects, [GtPair(1, 0, (0,))], "majority")


def test_sampling_is_deterministic(cfg):
    assert sample_scene(cfg, 5) == sample_scene(cfg, 5)
    assert sample_scene(cfg, 5) != sample_scene(cfg, 6)
    assert sample_scene(cfg, 5).seed == (11, 5)


def test_sample_regime_agrees_with_scene(cfg):
    for i in range(30):
        assert sample_regime(cfg, i) == sample_scene(cfg, i).regime


def test_scenes_realize_their_regime(cfg):
    for i in range(60):
        scene = sample_scene(cfg, i)
        assert 2 <= len(scene.humans) <= 8
        assert 1 <= len(scene.objects) <= 4
        assert regime_of(scene.interactive_ratio) == scene.regime
        for o in range(len(scene.objects)):
            k = sum(1 for p in scene.gt_pairs if p.obj == o)
            assert k >= 1
            assert regime_of(k / len(scene.humans)) == scene.regime
        assert all(0 <= v < cfg.verbs for p in scene.gt_pairs for v in p.verbs)


def test_single_regime_mixture():
    cfg = GeneratorConfig(mixture=(0.0, 1.0, 0.0), seed=2)
    assert {sample_regime(cfg, i) for i in range(50)} == {"balanced"}
    manifest = build_manifest(cfg, 50)
    assert manifest.chi_square == 0.0
    assert manifest.p_value == 1.0


def test_manifest_tracks_mixture(cfg):
    manifest = build_manifest(cfg, 2000)
    assert sum(manifest.counts.values()) == 2000
    assert sum(manifest.frequencies.values()) == pytest.approx(1.0)
    for regime in REGIMES:
        assert abs(manifest.frequencies[regime] - manifest.configured[regime]) < 0.04
    assert manifest.chi_square >= 0.0
    assert 0.0 <= manifest.p_value <= 1.0
    assert manifest.generator["seed"] == 11


def test_generate_dataset(cfg):
    scenes, manifest = generate_dataset(cfg, 20)
    scenes = list(scenes)
    assert [s.index for s in scenes] == list(range(20))
    assert manifest.count == 20
    with pytest.raises(ValueError):
        generate_dataset(cfg, 0)


class TestCandidates:
    def test_grid_layout(self, cfg):
        scene = sample_scene(cfg, 3)
        cands = build_candidates(scene, cfg)
        n_h, n_o = len(scene.humans), len(scene.objects)
        assert len(cands) == n_h * n_o
        np.testing.assert_array_equal(cands.object_idx, np.repeat(np.arange(n_o), n_h))
        assert int(cands.interactive.sum()) == scene.n_interactive
        assert cands.descriptors.shape == (n_h * n_o, descriptor_dim(cfg))
        assert not cands.verbs[~cands.interactive].any()
        assert cands.verbs[cands.interactive].sum(axis=1).min() >= 1

    def test_deterministic(self, cfg):
        scene = sample_scene(cfg, 4)
        a, b = build_candidates(scene, cfg), build_candidates(scene, cfg)
        np.testing.assert_array_equal(a.descriptors, b.descriptors)
        np.testing.assert_array_equal(a.oracle, b.oracle)

    def test_oracle_inputs(self):
        cfg = GeneratorConfig(feature_mode="oracle", feature_dim=5, seed=1)
        cands = build_candidates(sample_scene(cfg, 0), cfg)
        assert cands.inputs("oracle").shape[1] == descriptor_dim(cfg)
        assert cands.inputs("geometric").shape[1] == descriptor_dim(cfg) - 5

    def test_oracle_features_separate_classes(self):
        cfg = GeneratorConfig(feature_mode="oracle", seed=3)
        pos, neg = [], []
        for i in range(40):
            cands = build_candidates(sample_scene(cfg, i), cfg)
            pos.append(cands.oracle[cands.interactive & (cands.object_class == 0)])
            neg.append(cands.oracle[~cands.interactive & (cands.object_class == 0)])
        gap = np.linalg.norm(np.concatenate(pos).mean(axis=0) - np.concatenate(neg).mean(axis=0))
        assert gap == pytest.approx(cfg.separation * cfg.feature_std, rel=0.2)


class TestSceneFile:
    def test_round_trip_is_exact(self, cfg, tmp_path):
        scenes = [sample_scene(cfg, i) for i in range(10)]
        path = tmp_path / "scenes.jsonl"
        assert write_scenes(path, scenes) == 10
        assert read_scenes(path) == scenes
        assert len(path.read_text(encoding="utf-8").splitlines()) == 10

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_scenes(tmp_path / "nope.jsonl")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_scenes(path)

    def test_malformed_line_reports_position(self, cfg, tmp_path):
        path = tmp_path / "scenes.jsonl"
        write_scenes(path, [sample_scene(cfg, 0)])
        with path.open("a", encoding="utf-8") as fh:
            fh.write('{"humans": []}\n')
        with pytest.raises(DataError, match=":2:"):
            read_scenes(path)
