from __future__ import annotations


class IFieldError(Exception):
    """Base class for errors surfaced to the command line."""

    exit_code: int = 1


class ConfigError(IFieldError):
    exit_code = 2

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"invalid config key '{key}': {message}")


class DataError(IFieldError):
    exit_code = 3


class CheckpointError(IFieldError):
    exit_code = 4


class TrainingDivergedError(IFieldError):
    def __init__(self, stage: int, epoch: int, what: str) -> None:
        self.stage = stage
        self.epoch = epoch
        self.what = what
        super().__init__(f"training diverged in stage {stage}, epoch {epoch}: {what} is not finite")


class DegenerateFieldWarning(UserWarning):
    """A field was evaluated on too few pairs and fell back to its defined default."""


class EmptyGroundTruthWarning(UserWarning):
    """An AP was requested over a set without ground-truth positives."""


__all__ = [
    "IFieldError",
    "ConfigError",
    "DataError",
    "CheckpointError",
    "TrainingDivergedError",
    "DegenerateFieldWarning",
    "EmptyGroundTruthWarning",
]
