"""Speech-to-intent toolkit: shared front end, hierarchical recognizer,
direct intent head, cascade baseline, and the training loops that tie
them together."""

from .config import Config
from .errors import (CheckpointError, ConfigError, InputError, S2IError,
                     ShortUtteranceError, StageError, TargetTooLongError,
                     TrainingDivergedError)

__version__ = "0.1.0"

__all__ = [
    "Config", "S2IError", "InputError", "ConfigError", "ShortUtteranceError",
    "TargetTooLongError", "CheckpointError", "TrainingDivergedError",
    "StageError", "__version__",
]
