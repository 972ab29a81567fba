"""Exception types shared across the package."""


class S2IError(Exception):
    """Base class for all errors raised by this package."""


class InputError(S2IError):
    """Malformed caller input (non-finite audio, bad label ids, ...)."""


class ConfigError(S2IError):
    """Inconsistent or unsatisfiable configuration."""


class ShortUtteranceError(InputError):
    """Audio too short to produce a single feature frame."""

    def __init__(self, msg: str = "utterance too short"):
        super().__init__(msg)


class TargetTooLongError(InputError):
    """CTC target not admissible for the given number of frames."""


class CheckpointError(S2IError):
    """Unreadable, corrupted or incompatible checkpoint file."""


class TrainingDivergedError(S2IError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"training diverged at step {step}" + (f": {detail}" if detail else ""))


class StageError(S2IError):
    """Failure inside one stage of the baseline pipeline, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
