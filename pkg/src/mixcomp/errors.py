"""Exception hierarchy shared across the package."""


class MixcompError(Exception):
    """Base class for all errors raised by mixcomp."""


class ValidationError(MixcompError, ValueError):
    """An input object violates its structural invariants."""


class ShapeError(ValidationError):
    """Operands have incompatible dimensions."""


class NotPSDError(ValidationError):
    """A matrix has an eigenvalue below the clamping tolerance."""


class DomainError(MixcompError, ValueError):
    """A scalar argument lies outside the domain of a function."""


class SizeError(MixcompError):
    """A dense object would exceed the configured dimension cap."""


class GuardError(MixcompError):
    """An enumeration would exceed its guard; the violated bound is in ``bound``."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ConfigError(ValidationError):
    """An ensemble configuration file is malformed."""


class ProtocolViolation(MixcompError):
    """Encoder and decoder disagree, which means the shared randomness was misused."""


class SolverError(MixcompError):
    """An iterative solver did not converge; ``diagnostics`` holds the last state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleCoverError(MixcompError):
    """Some typical row has no eligible column, so no cover exists for these constants."""
