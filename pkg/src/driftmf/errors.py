"""Exception types shared across the package."""


class DriftMFError(Exception):
    """Base class for all driftmf errors."""


class ParseError(DriftMFError, ValueError):
    """A rating-log line could not be parsed."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class EmptyCorpusError(DriftMFError, ValueError):
    """A rating-log source contained no usable records."""


class ConfigError(DriftMFError, ValueError):
    """Inconsistent or out-of-range configuration."""


class DivergenceError(DriftMFError, RuntimeError):
    """Gradient descent produced non-finite values."""


class EmptyTestSetError(DriftMFError, ValueError):
    """Evaluation was requested against an empty test set."""


class StageError(DriftMFError, RuntimeError):
    """A pipeline stage failed; artifacts written so far are kept."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage}: {cause}")
