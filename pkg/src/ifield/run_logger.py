from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Mapping

from rich.console import Console
from rich.table import Table

if TYPE_CHECKING:  # pragma: no cover - import only for type checking
    from .diagnostics import GradcheckCase
    from .train.trainer import EpochRecord


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


class NullRunLogger:
    """Пустой логгер: используется, когда трассировка выключена."""

    def on_command(self, name: str, options: Mapping[str, object]) -> None:  # pragma: no cover - no behaviour
        return

    def on_stage_start(self, stage: int, epochs: int, scenes: int) -> None:  # pragma: no cover - no behaviour
        return

    def on_epoch_end(self, record: "EpochRecord") -> None:  # pragma: no cover - no behaviour
        return

    def on_stage_end(self, stage: int, final_loss: float | None) -> None:  # pragma: no cover - no behaviour
        return

    def on_metrics(self, title: str, rows: Mapping[str, object]) -> None:  # pragma: no cover - no behaviour
        return

    def on_gradcheck(self, case: "GradcheckCase") -> None:  # pragma: no cover - no behaviour
        return

    def on_artifact(self, path: Path, description: str) -> None:  # pragma: no cover - no behaviour
        return


class RunLogger(NullRunLogger):
    """Rich-powered progress tracing for batch runs."""

    def __init__(self, console: Console, *, every: int = 1) -> None:
        self.console = console
        self.every = max(1, every)

    def on_command(self, name: str, options: Mapping[str, object]) -> None:
        self.console.rule(f"[bold cyan]ifield {name}")
        for key, value in options.items():
            self.console.log(f"{key}={value}")

    def on_stage_start(self, stage: int, epochs: int, scenes: int) -> None:
        self.console.rule(f"[bold green]Stage {stage}")
        self.console.log(f"{epochs} epoch(s) over {scenes} scene(s)")

    def on_epoch_end(self, record: "EpochRecord") -> None:
        if record.epoch % self.every and record.epoch != 1:
            return
        parts = ", ".join(f"{k}={v:.4f}" for k, v in record.losses.items())
        self.console.log(f"stage {record.stage} epoch {record.epoch}: loss={record.loss:.4f} lr={record.lr:.2e} ({parts})")

    def on_stage_end(self, stage: int, final_loss: float | None) -> None:
        if final_loss is None:
            self.console.log(f"[yellow]stage {stage} ran no epochs")
        else:
            self.console.log(f"[bold]stage {stage} done[/bold], final loss {final_loss:.4f}")

    def on_metrics(self, title: str, rows: Mapping[str, object]) -> None:
        table = Table(title=title, show_header=True, header_style="bold")
        table.add_column("metric")
        table.add_column("value", justify="right")
        for key, value in rows.items():
            table.add_row(key, _fmt(value))
        self.console.print(table)

    def on_gradcheck(self, case: "GradcheckCase") -> None:
        status = "[green]pass" if case.passed else "[red]FAIL"
        self.console.log(f"{status}[/] {case.name}: {case.configs} config(s), max rel. err {case.max_rel_err:.2e}")

    def on_artifact(self, path: Path, description: str) -> None:
        self.console.log(f"wrote {description}: {path}")


__all__ = ["NullRunLogger", "RunLogger"]
