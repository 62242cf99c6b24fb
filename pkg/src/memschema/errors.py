"""Exception types shared across the toolkit."""


class MemschemaError(Exception):
    """Base class for all toolkit errors."""


class SessionLogError(MemschemaError):
    """A session document violates the log schema or a protocol invariant."""

    def __init__(self, message, line=None, trial=None):
        if trial is not None:
            message = f"trial {trial}: {message}"
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.trial = trial


class ManifestError(MemschemaError):
    """A dataset manifest is malformed or references missing files."""


class ScheduleError(MemschemaError):
    """A schedule cannot be generated from the given manifest."""


class TensorFormatError(MemschemaError):
    """A tensor file is corrupt or violates the VTNS layout."""


class EmptyVmsError(MemschemaError):
    """No participant contributed selections for the requested map kind."""


class DegenerateMapError(MemschemaError):
    """A map is constant, so correlation against it is undefined."""


class StatsError(MemschemaError):
    """A statistical operation received input outside its domain."""


class FeatureError(MemschemaError):
    """A descriptor or pooling operation received invalid input."""


class SolverError(MemschemaError):
    """The SVR dual solver received an invalid problem."""


class TrainingError(MemschemaError):
    """Head training diverged or received inconsistent data."""
