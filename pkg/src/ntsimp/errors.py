"""Exception types shared across the package."""


class NtsError(Exception):
    """Base class for all package errors."""


class ShapeError(NtsError, ValueError):
    pass


class InvalidArgument(NtsError, ValueError):
    pass


class IndexOutOfRange(NtsError, IndexError):
    pass


class TrainingDiverged(NtsError, RuntimeError):
    def __init__(self, epoch, index, loss):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, pair {index}")
        self.epoch = epoch
        self.index = index
        self.loss = loss


class CorruptCheckpoint(NtsError):
    pass


class UnsupportedVersion(NtsError):
    pass


class VocabMismatch(NtsError):
    pass


class ConfigError(NtsError, ValueError):
    """Raised for invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class StageError(NtsError):
    """Wraps a failure inside one pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
