from .generator import (
    CandidateSet,
    Manifest,
    build_candidates,
    build_manifest,
    descriptor_dim,
    generate_dataset,
    generate_scene,
    sample_regime,
    sample_scene,
)
from .scene_io import GtPair, Scene, SceneObject, read_scenes, write_json, write_scenes

__all__ = [
    "CandidateSet",
    "GtPair",
    "Manifest",
    "Scene",
    "SceneObject",
    "build_candidates",
    "build_manifest",
    "descriptor_dim",
    "generate_dataset",
    "generate_scene",
    "read_scenes",
    "sample_regime",
    "sample_scene",
    "write_json",
    "write_scenes",
]
