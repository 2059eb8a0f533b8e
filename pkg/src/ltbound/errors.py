"""Exception types shared across the package."""


class LocalTimeError(Exception):
    """Base class for all package errors."""


class NonFiniteSupport(LocalTimeError, TypeError):
    """A continuous named family was passed where a finite-support law is required."""


class NonZeroMean(LocalTimeError, ValueError):
    """The law does not have mean zero."""

    def __init__(self, mean, message=None):
        self.mean = float(mean)
        super().__init__(message or f"law must have mean 0, got mean {self.mean:.12g}")


class MeanMismatch(LocalTimeError, ValueError):
    """Two laws compared in convex order have different means."""


class InfeasibleY(LocalTimeError, ValueError):
    """The first-stage level leaves no variance budget (sigma^2 + x*y <= 0)."""


class OutOfRegime(LocalTimeError, ValueError):
    """The upcrossing bound is only available for b - x <= sigma."""


class OutOfInterval(LocalTimeError, ValueError):
    """The level lies outside the exit interval."""


class NegativeX(LocalTimeError, ValueError):
    """The exponential closed form is only available for x >= 0."""


class AllPathsCapped(LocalTimeError, RuntimeError):
    """Every simulated path hit the time cap, so no estimate is available."""


class CapReached(RuntimeWarning):
    """A simulated path hit the time cap before its stopping rule fired."""


class ParseError(LocalTimeError, ValueError):
    """Malformed text in one of the mini-grammars or a config document."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(LocalTimeError, ValueError):
    """Well-formed input that violates a constraint on a named field."""

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")
