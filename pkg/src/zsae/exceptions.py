"""Exception hierarchy shared across the package."""


class ZsaeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ZsaeError, ValueError):
    """Array dimensions do not match what the operation expects."""


class ParameterError(ZsaeError, ValueError):
    """A scalar parameter is outside its legal range."""


class StateError(ZsaeError, RuntimeError):
    """An object is used in the wrong lifecycle state (e.g. missing cache)."""


class ResourceLimitError(ZsaeError, RuntimeError):
    """A configured size cap would be exceeded."""


class TrainingError(ZsaeError, RuntimeError):
    """Optimisation diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ContractError(ZsaeError, ValueError):
    """A caller-side precondition was violated."""


class IntegrityError(ZsaeError, ValueError):
    """A persisted file is corrupt or truncated."""

    def __init__(self, message, section=None):
        super().__init__(message)
        self.section = section


class ConfigurationError(ZsaeError, ValueError):
    """An experiment configuration is incomplete or inconsistent."""
