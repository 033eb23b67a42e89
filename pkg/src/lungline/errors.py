"""Exception types shared across lungline modules."""


class LunglineError(Exception):
    """Base class for domain errors raised by this package."""


class ShapeError(LunglineError, ValueError):
    """A tensor has the wrong rank, extent, or divisibility."""


class StateError(LunglineError, RuntimeError):
    """An object is used before it is ready (e.g. forward on unbound weights)."""


class ConfigError(LunglineError, ValueError):
    """Inconsistent configuration between a model, data and training settings."""
