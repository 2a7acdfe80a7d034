"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a network or experiment configuration is invalid."""


class DegenerateStatsError(ArithmeticError):
    """Raised when a covariance matrix stays non-positive-definite after jittering.

    Carries the name of the offending matrix so callers can log which
    block of statistics collapsed.
    """

    def __init__(self, matrix_name, detail=""):
        self.matrix_name = matrix_name
        msg = f"covariance matrix {matrix_name!r} is not positive definite"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SnapshotError(IOError):
    """Raised when a checkpoint directory is missing files or inconsistent."""
