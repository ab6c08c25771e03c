"""Exception types shared across the package."""


class DomainError(ValueError):
    """Query time lies outside a trajectory's evaluation domain."""


class SingularFitError(RuntimeError):
    """Least-squares spline fit is rank deficient (e.g. an empty knot span)."""


class LogParseError(ValueError):
    """A trajectory log file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DatasetFormatError(ValueError):
    """A structured dataset document is malformed."""


class DatasetVersionError(DatasetFormatError):
    """A structured dataset document declares an unsupported version."""


class EpisodeDivergedError(RuntimeError):
    """Simulated state became non-finite; carries the time of divergence."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:.6f} s)")
        self.t = t


class ConfigError(ValueError):
    """An experiment configuration violates a module precondition."""
