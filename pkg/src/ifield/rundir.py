"""Run directories: every command output directory carries its config, version and seed."""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel

from . import __version__
from .config import RunConfig, dump_config

CONFIG_FILE = "config.json"
RUN_FILE = "run.json"


class RunInfo(BaseModel):
    command: str
    tool_version: str = __version__
    seed: int
    data_seed: int | None = None
    artifacts: list[str] = []


def resolve_out_dir(out: str | Path | None, cfg: RunConfig | None, default: str) -> Path:
    """Explicit ``out`` wins over the config's ``out_dir``, which wins over ``default``."""
    if out is not None:
        return Path(out)
    if cfg is not None and cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(default)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def open_run_dir(out: str | Path, cfg: RunConfig) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except FileExistsError as exc:
        raise NotADirectoryError(f"output path exists and is not a directory: {out}") from exc
    _write(out / CONFIG_FILE, dump_config(cfg))
    return out


def close_run_dir(
    out: Path,
    cfg: RunConfig,
    command: str,
    artifacts: list[Path],
    *,
    data_seed: int | None = None,
) -> RunInfo:
    names = sorted({p.relative_to(out).as_posix() if p.is_relative_to(out) else p.as_posix() for p in artifacts})
    seed = cfg.seed if cfg.seed is not None else cfg.train.seed
    info = RunInfo(command=command, seed=seed, data_seed=data_seed, artifacts=[CONFIG_FILE, *names])
    _write(out / RUN_FILE, json.dumps(info.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return info


def read_run_info(out: str | Path) -> RunInfo:
    return RunInfo.model_validate_json((Path(out) / RUN_FILE).read_text(encoding="utf-8"))


__all__ = ["CONFIG_FILE", "RUN_FILE", "RunInfo", "close_run_dir", "open_run_dir", "read_run_info", "resolve_out_dir"]
