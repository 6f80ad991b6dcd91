from .attention import AttentionParams, attention_cluster
from .clustering import hier_init, soft_assign, soft_two_means
from .grouping import FieldGroup, group_candidates
from .indicators import interactiveness_score, modification_indicator, removal_indicator, summary_distance
from .registry import SUMMARY_REGISTRY, ClusterSettings, FieldOutput, FieldParams, ProbeParams, fc_probe, run_field
from .state import FieldState, PairFeatures, energy

__all__ = [
    "AttentionParams",
    "ClusterSettings",
    "FieldGroup",
    "FieldOutput",
    "FieldParams",
    "FieldState",
    "PairFeatures",
    "ProbeParams",
    "SUMMARY_REGISTRY",
    "attention_cluster",
    "energy",
    "fc_probe",
    "group_candidates",
    "hier_init",
    "interactiveness_score",
    "modification_indicator",
    "removal_indicator",
    "run_field",
    "soft_assign",
    "soft_two_means",
    "summary_distance",
]
