"""Exception types shared across the package."""


class TEYOLOFError(Exception):
    """Base class for all package errors."""


class ConfigError(TEYOLOFError, ValueError):
    """Invalid architecture, shape or hyperparameter configuration."""


class UsageError(TEYOLOFError, ValueError):
    """An API was called in a way its contract forbids."""


class DataError(TEYOLOFError, ValueError):
    """Malformed or inconsistent dataset input."""


class TrainingError(TEYOLOFError, RuntimeError):
    """Training could not continue (e.g. a non-finite loss)."""
