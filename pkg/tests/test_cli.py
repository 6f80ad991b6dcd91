import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from ifield.__main__ import DEFAULT_ABLATIONS, _parse_ablation, cli_main
from ifield.field import SUMMARY_REGISTRY
from ifield.losses import FIELD_MODES
from ifield.train import load_checkpoint


def invoke(*args):
    return CliRunner().invoke(cli_main, ["--no-trace", *map(str, args)])


@pytest.fixture
def dataset(tmp_path, tiny_config_file):
    out = tmp_path / "data"
    result = invoke("generate", "--config", tiny_config_file, "--count", 6, "--out", out)
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def stage1(tmp_path, dataset, tiny_config_file):
    out = tmp_path / "train"
    result = invoke("train", "--config", tiny_config_file, "--data", dataset, "--out", out, "--stages", "1")
    assert result.exit_code == 0, result.output
    return out / "checkpoint-stage1.json"


def test_generate_writes_dataset(tmp_path, tiny_config_file):
    out = tmp_path / "gen"
    result = invoke("generate", "--config", tiny_config_file, "--count", 100, "--out", out)
    assert result.exit_code == 0, result.output
    assert len((out / "scenes.jsonl").read_text(encoding="utf-8").splitlines()) == 100
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["count"] == 100
    assert sum(manifest["counts"].values()) == 100
    run = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert run["command"] == "generate"
    assert run["artifacts"] == ["config.json", "manifest.json", "scenes.jsonl"]
    assert "Regime frequencies" in result.output
    assert "chi-square" in result.output


def test_generate_is_reproducible(tmp_path):
    a = invoke("generate", "--count", 20, "--seed", 3, "--out", tmp_path / "a")
    b = invoke("generate", "--count", 20, "--seed", 3, "--out", tmp_path / "b")
    assert a.exit_code == b.exit_code == 0
    assert (tmp_path / "a" / "scenes.jsonl").read_bytes() == (tmp_path / "b" / "scenes.jsonl").read_bytes()


def test_invalid_mixture_exits_2(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[generator]\nmixture = [0.5, 0.5, 0.5]\n", encoding="utf-8")
    result = invoke("generate", "--config", config, "--count", 5, "--out", tmp_path / "out")
    assert result.exit_code == 2
    assert "generator.mixture" in result.output


def test_missing_data_exits_3(tmp_path):
    result = invoke("train", "--data", tmp_path / "nowhere.jsonl", "--out", tmp_path / "out")
    assert result.exit_code == 3
    assert "not found" in result.output


def test_bad_checkpoint_exits_4(tmp_path, dataset):
    ckpt = tmp_path / "ckpt.json"
    ckpt.write_text("{}", encoding="utf-8")
    result = invoke("eval", ckpt, "--data", dataset, "--out", tmp_path / "out")
    assert result.exit_code == 4


def test_bad_stage_list(tmp_path, dataset):
    assert invoke("train", "--data", dataset, "--stages", "x", "--out", tmp_path / "o").exit_code == 2
    assert invoke("train", "--data", dataset, "--stages", "4", "--out", tmp_path / "o").exit_code == 2


def test_train_single_stage(stage1):
    out = stage1.parent
    assert sorted(p.name for p in out.glob("checkpoint-*.json")) == ["checkpoint-stage1.json"]
    params, cfg = load_checkpoint(stage1)
    assert params.stage == 1
    assert cfg.train.stages == (1,)
    log = (out / "train_log.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(log) == cfg.train.epochs.stage1
    run = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert "checkpoint-stage1.json" in run["artifacts"]


def test_resume_continues_with_later_stages(tmp_path, dataset, tiny_config_file, stage1):
    out = tmp_path / "resumed"
    result = invoke(
        "train", "--config", tiny_config_file, "--data", dataset, "--out", out, "--stages", "2,3", "--resume", stage1
    )
    assert result.exit_code == 0, result.output
    params, _ = load_checkpoint(out / "checkpoint-stage3.json")
    assert [r.stage for r in params.history][0] == 1
    assert params.history[-1].stage == 3


def test_threads_give_identical_parameters(tmp_path, dataset, tiny_config_file):
    for threads in (1, 3):
        result = invoke(
            "train", "--config", tiny_config_file, "--data", dataset, "--out", tmp_path / f"t{threads}",
            "--stages", "1,2", "--threads", threads,
        )
        assert result.exit_code == 0, result.output
    one, _ = load_checkpoint(tmp_path / "t1" / "checkpoint-stage2.json")
    three, _ = load_checkpoint(tmp_path / "t3" / "checkpoint-stage2.json")
    for name in one.names():
        np.testing.assert_array_equal(one.arrays[name], three.arrays[name])


def test_unsupervised_field_flag(tmp_path, dataset, tiny_config_file):
    out = tmp_path / "unsup"
    result = invoke(
        "train", "--config", tiny_config_file, "--data", dataset, "--out", out, "--stages", "1,2", "--unsup-field"
    )
    assert result.exit_code == 0, result.output
    _, cfg = load_checkpoint(out / "checkpoint-stage2.json")
    assert cfg.field.mode == "unsup"


class TestEval:
    def test_report_files(self, tmp_path, dataset, stage1):
        out = tmp_path / "report"
        result = invoke("eval", stage1, "--data", dataset, "--out", out, "--topk", 3)
        assert result.exit_code == 0, result.output
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert list(report["protocols"]) == ["all", "top3"]
        assert report["meta"]["checkpoint"] == "checkpoint-stage1.json"
        for name in ("metrics.csv", "count_error.csv", "pr_interactiveness.svg", "pr_verbs.svg", "predictions.jsonl"):
            assert (out / name).is_file(), name

    def test_no_sb(self, tmp_path, dataset, stage1):
        out = tmp_path / "report"
        assert invoke("eval", stage1, "--data", dataset, "--out", out, "--no-sb").exit_code == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["meta"]["use_sb"] is False
        first = json.loads((out / "predictions.jsonl").read_text(encoding="utf-8").splitlines()[0])
        assert first["s_b"] is None

    def test_rerun_is_byte_identical(self, tmp_path, dataset, stage1):
        for name in ("a", "b"):
            assert invoke("eval", stage1, "--data", dataset, "--out", tmp_path / name).exit_code == 0
        for name in ("report.json", "metrics.csv", "pr_interactiveness.svg", "predictions.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_score_external_predictions(self, tmp_path, dataset, stage1):
        evaluated = tmp_path / "eval"
        assert invoke("eval", stage1, "--data", dataset, "--out", evaluated).exit_code == 0
        scored = tmp_path / "scored"
        result = invoke("score", evaluated / "predictions.jsonl", "--data", dataset, "--out", scored)
        assert result.exit_code == 0, result.output
        a = json.loads((evaluated / "report.json").read_text(encoding="utf-8"))
        b = json.loads((scored / "report.json").read_text(encoding="utf-8"))
        assert b["protocols"]["all"] == a["protocols"]["all"]
        assert b["meta"]["checkpoint"] == "predictions.jsonl"

    def test_score_missing_predictions(self, tmp_path, dataset):
        assert invoke("score", tmp_path / "none.jsonl", "--data", dataset, "--out", tmp_path / "o").exit_code == 3


def test_gradcheck_passes(tmp_path):
    result = invoke("gradcheck", "--configs", 1)
    assert result.exit_code == 0, result.output
    assert "Gradient check" in result.output


def test_gradcheck_planted_defect_fails():
    result = invoke("gradcheck", "--configs", 2, "--plant-defect")
    assert result.exit_code == 1
    assert "gradient check failed" in result.output


def test_trace_logs_progress(tmp_path, tiny_config_file):
    result = CliRunner().invoke(
        cli_main, ["--trace", "generate", "--config", str(tiny_config_file), "--count", "3", "--out", str(tmp_path / "g")]
    )
    assert result.exit_code == 0, result.output
    assert "ifield generate" in result.output


@pytest.mark.slow
def test_ablate_writes_table(tmp_path, dataset, tiny_config_file):
    out = tmp_path / "ablate"
    result = invoke(
        "ablate", "--config", tiny_config_file, "--data", dataset, "--out", out,
        "--run", "attention:full", "--run", "attention:none",
    )
    assert result.exit_code == 0, result.output
    rows = json.loads((out / "ablation.json").read_text(encoding="utf-8"))
    assert [r["run"] for r in rows] == ["attention-full", "attention-full-no-sb", "attention-none"]
    assert Path(out / "attention-full" / "checkpoint-stage3.json").is_file()
    assert (out / "ablation.csv").read_text(encoding="utf-8").startswith("run,interactiveness_ap,verb_map")



def test_default_ablation_covers_every_variant_and_mode():
    runs = [_parse_ablation(r) for r in DEFAULT_ABLATIONS]
    assert {mode for variant, mode in runs if variant == "attention"} == set(FIELD_MODES)
    assert {variant for variant, _ in runs} == set(SUMMARY_REGISTRY)
    assert len(set(runs)) == len(runs)
