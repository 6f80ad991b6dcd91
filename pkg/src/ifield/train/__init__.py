from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .model import ModelOutput, ModelParams, ModelSpec, forward, init_params
from .optim import AdamW, scheduled_lr
from .predict import PairPrediction, PredictOptions, ScenePrediction, predict, score_candidates
from .trainer import (
    EpochRecord,
    TrainData,
    Trainer,
    initial_params,
    model_spec,
    train_stage1,
    train_stage2,
    train_stage3,
)

__all__ = [
    "AdamW",
    "EpochRecord",
    "FORMAT_VERSION",
    "ModelOutput",
    "ModelParams",
    "ModelSpec",
    "PairPrediction",
    "PredictOptions",
    "ScenePrediction",
    "TrainData",
    "Trainer",
    "forward",
    "init_params",
    "initial_params",
    "load_checkpoint",
    "model_spec",
    "predict",
    "save_checkpoint",
    "scheduled_lr",
    "score_candidates",
    "train_stage1",
    "train_stage2",
    "train_stage3",
]
