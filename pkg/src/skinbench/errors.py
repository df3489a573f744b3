"""Exception hierarchy for the benchmarking suite.

Every error raised on purpose by this package derives from SkinBenchError,
so callers (notably the CLI) can map failures to exit codes without
catching bare Exception.
"""


class SkinBenchError(Exception):
    """Base class for all package errors."""


class UsageError(SkinBenchError):
    """Bad input or configuration: maps to CLI exit code 2."""


class RuntimeFailure(SkinBenchError):
    """Failure while executing a valid request: maps to CLI exit code 3."""


# --- dataset ---------------------------------------------------------------

class MissingRoot(UsageError):
    pass


class EmptyDataset(UsageError):
    pass


class BadRatios(UsageError):
    pass


class EmptyClass(UsageError):
    pass


class DecodeError(RuntimeFailure):
    def __init__(self, path, reason="", index=None):
        self.path = str(path)
        self.index = index
        msg = f"cannot decode image: {self.path}"
        if index is not None:
            msg += f" (batch index {index})"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


# --- preprocess ------------------------------------------------------------

class EmptyImage(UsageError):
    pass


# --- model zoo -------------------------------------------------------------

class UnknownBackbone(UsageError):
    pass


class WeightsUnavailable(RuntimeFailure):
    pass


class BadClassCount(UsageError):
    pass


class IoError(RuntimeFailure):
    pass


class CorruptArtifact(RuntimeFailure):
    pass


# --- training --------------------------------------------------------------

class BadConfig(UsageError):
    pass


class EmptySplit(UsageError):
    pass


class LabelOutOfRange(UsageError):
    pass


class TrainingError(RuntimeFailure):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


# --- evaluation ------------------------------------------------------------

class ShapeMismatch(UsageError):
    pass


class LengthMismatch(UsageError):
    pass


class IndexOutOfRange(UsageError):
    pass


class EmptyMatrix(UsageError):
    pass


class ClassMismatch(UsageError):
    pass


# --- report ----------------------------------------------------------------

class DuplicateModel(UsageError):
    pass


class EmptyInput(UsageError):
    pass
