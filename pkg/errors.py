from typing import Optional

# Exit codes per error category; 1 is left for unexpected failures.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_ARTIFACT = 5

EXIT_CODES = {
    "config": EXIT_CONFIG,
    "data": EXIT_DATA,
    "training": EXIT_TRAINING,
    "artifact": EXIT_ARTIFACT,
}


class MtlError(Exception):
    """Base class for every expected failure in the package."""
    category = "internal"


# Configuration

class ConfigError(MtlError, ValueError):
    category = "config"


# Data decoding and assembly

class DataError(MtlError, ValueError):
    category = "data"


class IdxMagicError(DataError):
    pass


class IdxTruncatedError(DataError):
    pass


class IdxCountMismatchError(DataError):
    pass


class ImageSizeError(DataError):
    pass


class LabelRangeError(DataError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class EmptyClassError(DataError):
    pass


class GridMetaError(DataError):
    pass


# Numerics and training

class TrainingError(MtlError):
    category = "training"


class ShapeMismatchError(TrainingError, ValueError):
    pass


class StaleContextError(TrainingError):
    pass


class NonFiniteLossError(TrainingError):
    def __init__(self, epoch: int, batch: int, component: str, value: float):
        super().__init__(
            f"Non-finite loss at epoch {epoch}, batch {batch}: {component}={value}"
        )
        self.epoch = epoch
        self.batch = batch
        self.component = component
        self.value = value


# Files produced by or for the pipeline

class ArtifactError(MtlError):
    category = "artifact"


class CheckpointError(ArtifactError):
    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError, ValueError):
    pass


class MissingMetricsError(ArtifactError):
    pass


def exit_code_for(category: Optional[str]) -> int:
    return EXIT_CODES.get(category or "", 1)
