from __future__ import annotations

import csv
import functools
import io
import json
import pathlib
from typing import Any, Callable, Sequence

import click
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import REGIMES, EvalOptions, RunConfig, build_config, read_config_file
from .diagnostics import run_suite
from .errors import DataError, IFieldError
from .eval import emit_report, evaluate, read_predictions, score_predictions, write_predictions
from .rundir import close_run_dir, open_run_dir, resolve_out_dir
from .run_logger import NullRunLogger, RunLogger
from .settings import settings
from .synth import Scene, generate_dataset, read_scenes, write_json, write_scenes
from .train import TrainData, Trainer, initial_params, load_checkpoint, save_checkpoint

console = Console()

SCENE_FILE = "scenes.jsonl"
MANIFEST_FILE = "manifest.json"
PREDICTION_FILE = "predictions.jsonl"
TRAIN_LOG = "train_log.jsonl"


class CommandError(click.ClickException):
    """Click error carrying the exit code of the underlying ifield error."""

    def __init__(self, message: str, exit_code: int = 1) -> None:
        super().__init__(message)
        self.exit_code = exit_code


def _guarded(fn: Callable[..., Any]) -> Callable[..., Any]:
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except IFieldError as exc:
            raise CommandError(str(exc), exc.exit_code) from exc
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}") from exc

    return wrapper


def _logger(ctx: click.Context) -> NullRunLogger:
    return ctx.obj["logger"]


def _threads(ctx: click.Context, override: int | None) -> int:
    return override or ctx.obj["threads"]


def _scene_path(data: str) -> pathlib.Path:
    path = pathlib.Path(data)
    return path / SCENE_FILE if path.is_dir() else path


def _load_dataset(data: str) -> tuple[list[Scene], dict[str, Any] | None]:
    """Scenes plus the generator settings recorded in the dataset manifest, if any."""
    path = _scene_path(data)
    scenes = read_scenes(path)
    manifest = path.parent / MANIFEST_FILE
    if not manifest.is_file():
        return scenes, None
    try:
        generator = json.loads(manifest.read_text(encoding="utf-8")).get("generator")
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest} is not valid JSON: {exc}") from exc
    return scenes, generator


def _run_config(config: str | None, overrides: dict[str, Any]) -> RunConfig:
    data = read_config_file(config) if config else {}
    return build_config(data, overrides)


def _fmt(value: float) -> str:
    return f"{value:.4f}"


def _summary_rows(report) -> dict[str, object]:
    rows: dict[str, object] = {}
    for name, proto in report.protocols.items():
        rows[f"interactiveness AP ({name})"] = proto.interactiveness_ap
        rows[f"verb mAP ({name})"] = proto.verb_map
    for regime, err in report.count_error.items():
        rows[f"count error ({regime})"] = err
    return rows


# ------------------------------------------------------------------ group
@click.group()
@click.version_option(__version__)
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=lambda: settings.threads,
    show_default="IFIELD_THREADS or 1",
    help="Worker threads for per-scene work; 1 is bit-deterministic",
)
@click.option("--trace/--no-trace", default=lambda: settings.trace, help="Show progress logs")
@click.pass_context
def cli_main(ctx: click.Context, threads: int, trace: bool) -> None:
    """ifield: обучение и оценка поля интерактивности на синтетических сценах (CLI)."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads
    ctx.obj["logger"] = RunLogger(console) if trace else NullRunLogger()


# --------------------------------------------------------------- generate
@cli_main.command("generate")
@click.option("--config", "config_path", type=str, help="TOML or JSON run config")
@click.option("--count", type=click.IntRange(min=1), default=1000, show_default=True, help="Number of scenes")
@click.option("--out", "out_dir", type=str, help="Output directory (scenes.jsonl + manifest.json)")
@click.option("--seed", type=click.IntRange(min=0), help="Override the generator seed")
@click.pass_context
@_guarded
def generate_cmd(ctx: click.Context, config_path: str | None, count: int, out_dir: str | None, seed: int | None) -> None:
    """Генерирует синтетический набор сцен и печатает частоты режимов."""
    overrides = {"generator": {"seed": seed}} if seed is not None else {}
    cfg = _run_config(config_path, overrides)
    logger = _logger(ctx)
    logger.on_command("generate", {"count": count, "seed": cfg.generator.seed})

    out = open_run_dir(resolve_out_dir(out_dir, cfg, settings.out_dir), cfg)
    scenes, manifest = generate_dataset(cfg.generator, count)
    scene_file = out / SCENE_FILE
    written = write_scenes(scene_file, scenes)
    manifest_file = out / MANIFEST_FILE
    write_json(manifest_file, manifest.model_dump(mode="json"))
    close_run_dir(out, cfg, "generate", [scene_file, manifest_file], data_seed=cfg.generator.seed)
    logger.on_artifact(scene_file, f"{written} scene(s)")

    table = Table(title="Regime frequencies", header_style="bold")
    for column in ("regime", "configured", "realized", "scenes"):
        table.add_column(column, justify="left" if column == "regime" else "right")
    for regime in REGIMES:
        table.add_row(
            regime,
            _fmt(manifest.configured[regime]),
            _fmt(manifest.frequencies[regime]),
            str(manifest.counts[regime]),
        )
    console.print(table)
    console.print(f"chi-square {manifest.chi_square:.3f} (p = {manifest.p_value:.3f})")


# ------------------------------------------------------------------ train
def _parse_stages(value: str | None) -> list[int] | None:
    if value is None:
        return None
    try:
        return sorted({int(part) for part in value.split(",") if part.strip()})
    except ValueError as exc:
        raise click.BadParameter(f"expected a comma-separated stage list, got '{value}'") from exc


def _checkpoint_name(stage: int) -> str:
    return f"checkpoint-stage{stage}.json"


def _train(
    cfg: RunConfig,
    scenes: Sequence[Scene],
    out: pathlib.Path,
    *,
    threads: int,
    logger: NullRunLogger,
    resume: str | None = None,
) -> tuple[Any, list[pathlib.Path]]:
    log_path = out / TRAIN_LOG
    if log_path.exists():
        log_path.unlink()
    params = load_checkpoint(resume)[0] if resume else initial_params(cfg)
    artifacts: list[pathlib.Path] = [log_path]

    def _save(stage: int, trained) -> None:
        path = save_checkpoint(out / _checkpoint_name(stage), trained, cfg)
        artifacts.append(path)
        logger.on_artifact(path, f"stage {stage} checkpoint")

    trainer = Trainer(cfg, TrainData.build(scenes, cfg), threads=threads, logger=logger, log_path=log_path)
    params = trainer.fit(params, cfg.train.stages, on_stage_end=_save)
    return params, artifacts


@cli_main.command("train")
@click.option("--config", "config_path", type=str, help="TOML or JSON run config")
@click.option("--data", "data_path", type=str, required=True, help="Scene file or generated dataset directory")
@click.option("--out", "out_dir", type=str, help="Output directory for checkpoints and logs")
@click.option("--stages", type=str, help="Comma-separated subset of stages 1,2,3")
@click.option("--unsup-field", is_flag=True, help="Train the field with unsupervised losses only")
@click.option("--resume", type=str, help="Start from this checkpoint instead of fresh parameters")
@click.option("--seed", type=click.IntRange(min=0), help="Override the training seed")
@click.option("--threads", "threads_override", type=click.IntRange(min=1), help="Override the worker thread count")
@click.pass_context
@_guarded
def train_cmd(
    ctx: click.Context,
    config_path: str | None,
    data_path: str,
    out_dir: str | None,
    stages: str | None,
    unsup_field: bool,
    resume: str | None,
    seed: int | None,
    threads_override: int | None,
) -> None:
    """Run the staged training schedule; one checkpoint is written per stage."""
    scenes, generator = _load_dataset(data_path)
    overrides: dict[str, Any] = {}
    if generator is not None:
        overrides["generator"] = generator
    if (chosen := _parse_stages(stages)) is not None:
        overrides.setdefault("train", {})["stages"] = chosen
    if unsup_field:
        overrides["field"] = {"mode": "unsup"}
    if seed is not None:
        overrides.setdefault("train", {})["seed"] = seed
    cfg = _run_config(config_path, overrides)
    threads = _threads(ctx, threads_override)
    logger = _logger(ctx)
    logger.on_command(
        "train",
        {"scenes": len(scenes), "stages": cfg.train.stages, "variant": cfg.field.variant, "mode": cfg.field.mode, "threads": threads},
    )

    out = open_run_dir(resolve_out_dir(out_dir, cfg, settings.out_dir), cfg)
    params, artifacts = _train(cfg, scenes, out, threads=threads, logger=logger, resume=resume)
    close_run_dir(out, cfg, "train", artifacts, data_seed=scenes[0].seed[0])
    if params.history:
        last = params.history[-1]
        console.print(f"final loss {last.loss:.4f} (stage {last.stage}, epoch {last.epoch})")


# ------------------------------------------------------------------- eval
def _eval_options(cfg: RunConfig, topk: Sequence[int], no_sb: bool, class_agnostic: bool) -> EvalOptions:
    values = cfg.eval.model_dump()
    if topk:
        values["topk"] = tuple(topk)
    if no_sb:
        values["use_sb"] = False
    if class_agnostic:
        values["class_aware"] = False
    return EvalOptions.model_validate(values)


@cli_main.command("eval")
@click.argument("checkpoint", type=str)
@click.option("--data", "data_path", type=str, required=True, help="Scene file or generated dataset directory")
@click.option("--out", "out_dir", type=str, help="Report directory")
@click.option("--topk", type=click.IntRange(min=1), multiple=True, help="Top-k protocol(s) reported next to 'all'")
@click.option("--no-sb", is_flag=True, help="Score pairs by S_v alone")
@click.option("--class-agnostic", is_flag=True, help="Match predictions to ground truth of any object class")
@click.option("--threads", "threads_override", type=click.IntRange(min=1), help="Override the worker thread count")
@click.pass_context
@_guarded
def eval_cmd(
    ctx: click.Context,
    checkpoint: str,
    data_path: str,
    out_dir: str | None,
    topk: tuple[int, ...],
    no_sb: bool,
    class_agnostic: bool,
    threads_override: int | None,
) -> None:
    """Predict every scene with a checkpoint and emit the evaluation report."""
    params, cfg = load_checkpoint(checkpoint)
    scenes, _ = _load_dataset(data_path)
    opts = _eval_options(cfg, topk, no_sb, class_agnostic)
    threads = _threads(ctx, threads_override)
    logger = _logger(ctx)
    logger.on_command("eval", {"checkpoint": checkpoint, "scenes": len(scenes), "use_sb": opts.use_sb, "threads": threads})

    result = evaluate(params, scenes, cfg, opts=opts, threads=threads, checkpoint=pathlib.Path(checkpoint).name)
    out = open_run_dir(resolve_out_dir(out_dir, cfg, settings.out_dir), cfg)
    artifacts = emit_report(result.report, out)
    pred_file = out / PREDICTION_FILE
    write_predictions(pred_file, result.records)
    artifacts.append(pred_file)
    close_run_dir(out, cfg, "eval", artifacts, data_seed=scenes[0].seed[0])
    for path in artifacts:
        logger.on_artifact(path, "report file")
    logger.on_metrics("Evaluation", _summary_rows(result.report))


@cli_main.command("score")
@click.argument("predictions", type=str)
@click.option("--data", "data_path", type=str, required=True, help="Scene file or generated dataset directory")
@click.option("--out", "out_dir", type=str, help="Report directory")
@click.option("--topk", type=click.IntRange(min=1), multiple=True, help="Top-k protocol(s) reported next to 'all'")
@click.option("--class-agnostic", is_flag=True, help="Match predictions to ground truth of any object class")
@click.pass_context
@_guarded
def score_cmd(
    ctx: click.Context,
    predictions: str,
    data_path: str,
    out_dir: str | None,
    topk: tuple[int, ...],
    class_agnostic: bool,
) -> None:
    """Score an external prediction file; records without S_b rank by mean verb score."""
    records = read_predictions(predictions)
    scenes, _ = _load_dataset(data_path)
    cfg = build_config()
    opts = _eval_options(cfg, topk, False, class_agnostic)
    report = score_predictions(records, scenes, opts, source=pathlib.Path(predictions).name)
    out = open_run_dir(resolve_out_dir(out_dir, None, settings.out_dir), cfg)
    artifacts = emit_report(report, out)
    close_run_dir(out, cfg, "score", artifacts, data_seed=scenes[0].seed[0])
    _logger(ctx).on_metrics("Scored predictions", _summary_rows(report))


# -------------------------------------------------------------- gradcheck
@cli_main.command("gradcheck")
@click.option("--config", "config_path", type=str, help="Accepted for symmetry; losses are checked at unit weights")
@click.option("--configs", type=click.IntRange(min=1), help="Random configurations per case")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--plant-defect", is_flag=True, help="Scale every checked gradient by 1.5; the suite must fail")
@click.pass_context
@_guarded
def gradcheck_cmd(ctx: click.Context, config_path: str | None, configs: int | None, seed: int, plant_defect: bool) -> None:
    """Проверка градиентов конечными разностями для всех потерь и операций поля."""
    if config_path:
        _run_config(config_path, {})
    logger = _logger(ctx)
    logger.on_command("gradcheck", {"seed": seed, "plant_defect": plant_defect})
    suite = run_suite(configs=configs, seed=seed, plant_defect=plant_defect, logger=logger)

    table = Table(title="Gradient check", header_style="bold")
    table.add_column("case")
    table.add_column("configs", justify="right")
    table.add_column("max rel. err", justify="right")
    table.add_column("status")
    for case in suite.cases:
        table.add_row(case.name, str(case.configs), f"{case.max_rel_err:.2e}", "[green]pass" if case.passed else "[red]FAIL")
    console.print(table)
    console.print(f"max rel. err {suite.max_rel_err:.2e} in {suite.seconds:.1f}s")
    if not suite.passed:
        failed = ", ".join(c.name for c in suite.cases if not c.passed)
        raise CommandError(f"gradient check failed: {failed}")


# ----------------------------------------------------------------- ablate
DEFAULT_ABLATIONS = (
    "attention:full",
    "attention:unsup",
    "attention:card_only",
    "attention:change_only",
    "attention:none",
    "clustering:full",
    "fc:full",
)


def _parse_ablation(spec: str) -> tuple[str, str]:
    variant, _, mode = spec.partition(":")
    return variant, mode or "full"


@cli_main.command("ablate")
@click.option("--config", "config_path", type=str, help="TOML or JSON run config shared by every row")
@click.option("--data", "data_path", type=str, required=True, help="Training scenes")
@click.option("--test-data", "test_path", type=str, help="Evaluation scenes (defaults to the training scenes)")
@click.option("--out", "out_dir", type=str, help="Output directory")
@click.option(
    "--run",
    "runs",
    multiple=True,
    help="variant:mode to train, e.g. attention:full, fc:full, attention:none (repeatable)",
)
@click.option("--threads", "threads_override", type=click.IntRange(min=1), help="Override the worker thread count")
@click.pass_context
@_guarded
def ablate_cmd(
    ctx: click.Context,
    config_path: str | None,
    data_path: str,
    test_path: str | None,
    out_dir: str | None,
    runs: tuple[str, ...],
    threads_override: int | None,
) -> None:
    """Train each field variant/mode on one dataset and tabulate the metrics.

    A ``full`` run is also re-evaluated without S_b.
    """
    scenes, generator = _load_dataset(data_path)
    test_scenes = _load_dataset(test_path)[0] if test_path else scenes
    base = read_config_file(config_path) if config_path else {}
    threads = _threads(ctx, threads_override)
    logger = _logger(ctx)
    overrides = {"generator": generator} if generator is not None else {}
    root_cfg = build_config(base, overrides)
    out = open_run_dir(resolve_out_dir(out_dir, root_cfg, settings.out_dir), root_cfg)

    rows: list[dict[str, Any]] = []
    artifacts: list[pathlib.Path] = []
    for spec in runs or DEFAULT_ABLATIONS:
        variant, mode = _parse_ablation(spec)
        cfg = build_config(base, {**overrides, "field": {"variant": variant, "mode": mode}})
        name = f"{variant}-{mode}"
        logger.on_command("ablate", {"run": name})
        run_dir = out / name
        run_dir.mkdir(parents=True, exist_ok=True)
        params, trained = _train(cfg, scenes, run_dir, threads=threads, logger=logger)
        artifacts.extend(trained)
        evaluations = [(name, cfg.eval)]
        if mode == "full":
            evaluations.append((f"{name}-no-sb", cfg.eval.model_copy(update={"use_sb": False})))
        for label, opts in evaluations:
            report = evaluate(params, test_scenes, cfg, opts=opts, threads=threads).report
            artifacts.extend(emit_report(report, out / label / "report"))
            rows.append(
                {
                    "run": label,
                    "interactiveness_ap": report.full.interactiveness_ap,
                    "verb_map": report.full.verb_map,
                    **{f"count_error_{r}": report.count_error.get(r) for r in REGIMES},
                }
            )

    table_file = out / "ablation.json"
    write_json(table_file, rows)
    csv_file = out / "ablation.csv"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    csv_file.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    close_run_dir(out, root_cfg, "ablate", [table_file, csv_file, *artifacts], data_seed=scenes[0].seed[0])

    table = Table(title="Ablation", header_style="bold")
    for column in rows[0]:
        table.add_column(column, justify="left" if column == "run" else "right")
    for row in rows:
        table.add_row(*(v if isinstance(v, str) else "-" if v is None else _fmt(v) for v in row.values()))
    console.print(table)


if __name__ == "__main__":  # pragma: no cover
    cli_main()
