"""Evaluation report model and its on-disk emission (JSON, CSV, SVG).

Layout of a report directory::

    report.json                 the full EvalReport
    metrics.csv                 protocol,metric,value rows
    count_error.csv             regime,count_error rows
    pr_interactiveness.svg      interactiveness PR curve per top-k protocol
    pr_verbs.svg                per-verb PR curves of the full protocol
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from pydantic import BaseModel, Field  # noqa: E402

SVG_SALT = "ifield"


class ProtocolMetrics(BaseModel):
    interactiveness_ap: float = 0.0
    verb_map: float = 0.0
    per_verb_ap: dict[int, float] = Field(default_factory=dict)
    detections: int = 0


class RunMetadata(BaseModel):
    tool_version: str
    seed: int
    data_seed: int | None = None
    checkpoint: str | None = None
    scenes: int = 0
    use_sb: bool = True
    class_aware: bool = True
    iou_thr: float = 0.5
    field_variant: str | None = None
    field_mode: str | None = None


class EvalReport(BaseModel):
    protocols: dict[str, ProtocolMetrics] = Field(default_factory=dict)
    count_error: dict[str, float] = Field(default_factory=dict)
    ap_by_regime: dict[str, float] = Field(default_factory=dict)
    ap_by_class: dict[int, float] = Field(default_factory=dict)
    pr_curves: dict[str, list[tuple[float, float]]] = Field(default_factory=dict)
    verb_curves: dict[str, list[tuple[float, float]]] = Field(default_factory=dict)
    meta: RunMetadata

    @property
    def full(self) -> ProtocolMetrics:
        return self.protocols.get("all", ProtocolMetrics())

    def metric_rows(self) -> list[tuple[str, str, float]]:
        rows: list[tuple[str, str, float]] = []
        for name, proto in self.protocols.items():
            rows.append((name, "interactiveness_ap", proto.interactiveness_ap))
            rows.append((name, "verb_map", proto.verb_map))
            for verb, ap in sorted(proto.per_verb_ap.items()):
                rows.append((name, f"verb_ap_{verb}", ap))
        for regime, ap in self.ap_by_regime.items():
            rows.append(("all", f"interactiveness_ap_{regime}", ap))
        for cls, ap in sorted(self.ap_by_class.items()):
            rows.append(("all", f"interactiveness_ap_class_{cls}", ap))
        return rows


def _csv(rows: list[tuple], header: tuple[str, ...]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _svg(curves: dict[str, list[tuple[float, float]]], title: str) -> str:
    with plt.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(4.5, 4.0))
        try:
            for name, points in curves.items():
                if not points:
                    continue
                recall, precision = zip(*points)
                ax.step(recall, precision, where="post", label=name)
            ax.set_xlim(0.0, 1.0)
            ax.set_ylim(0.0, 1.05)
            ax.set_xlabel("recall")
            ax.set_ylabel("precision")
            ax.set_title(title)
            if any(curves.values()):
                ax.legend(loc="lower left")
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buf.getvalue()


def emit_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write every report file; identical reports produce identical bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n",
        "metrics.csv": _csv(report.metric_rows(), ("protocol", "metric", "value")),
        "count_error.csv": _csv(list(report.count_error.items()), ("regime", "count_error")),
        "pr_interactiveness.svg": _svg(report.pr_curves, "interactiveness"),
        "pr_verbs.svg": _svg(report.verb_curves, "verbs"),
    }
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)
    return written


__all__ = ["EvalReport", "ProtocolMetrics", "RunMetadata", "emit_report"]
