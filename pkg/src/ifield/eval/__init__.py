from .harness import (
    Evaluation,
    build_report,
    evaluate,
    predict_scenes,
    read_predictions,
    score_predictions,
    to_records,
    write_predictions,
)
from .metrics import (
    DetectionRecord,
    GtEntry,
    VerbAP,
    ap_by_class,
    ap_by_regime,
    average_precision,
    count_error,
    ground_truth,
    interactiveness_ap,
    pr_curve,
    topk_filter,
    verb_ap,
)
from .report import EvalReport, ProtocolMetrics, RunMetadata, emit_report

__all__ = [
    "DetectionRecord",
    "EvalReport",
    "Evaluation",
    "GtEntry",
    "ProtocolMetrics",
    "RunMetadata",
    "VerbAP",
    "ap_by_class",
    "ap_by_regime",
    "average_precision",
    "build_report",
    "count_error",
    "emit_report",
    "evaluate",
    "ground_truth",
    "interactiveness_ap",
    "pr_curve",
    "predict_scenes",
    "read_predictions",
    "score_predictions",
    "to_records",
    "topk_filter",
    "verb_ap",
    "write_predictions",
]
