"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so every error a user can trigger should
derive from :class:`ArcmixError`.
"""


class ArcmixError(Exception):
    exit_code = 1


class InvalidConfigError(ArcmixError, ValueError):
    """Bad hyperparameters, bad shapes in a config, unknown config keys."""


class InvalidInputError(ArcmixError, ValueError):
    """Empty batches, empty files, out-of-range labels, malformed targets."""


class ShapeError(ArcmixError, ValueError):
    pass


class InputFormatError(InvalidInputError):
    """A data file could not be parsed. ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CacheMismatchError(ArcmixError, RuntimeError):
    """backward() was handed a cache that does not belong to the parameters."""


class TrainingDivergedError(ArcmixError, FloatingPointError):
    exit_code = 2

    def __init__(self, message, epoch=None):
        self.epoch = epoch
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)


class ArcmixIOError(ArcmixError, OSError):
    """A file could not be read or written."""

    exit_code = 3
