"""Exception hierarchy shared by the package."""


class LevyCodecError(Exception):
    """Base class for all errors raised by levycodec."""


class InvalidModelError(LevyCodecError, ValueError):
    """A Levy measure, jump law or triplet violates its invariants."""


class QuadratureError(LevyCodecError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, error_estimate):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


class ZeroTailMassError(LevyCodecError, ZeroDivisionError):
    """A ratio normalised by the tail mass was requested where the tail mass is zero."""


class ResolutionError(LevyCodecError, RuntimeError):
    """A requested resolution is outside what the implementation can represent."""


class MalformedStreamError(LevyCodecError, ValueError):
    """A bit stream or container does not parse under the expected grammar."""


class SweepFailedError(LevyCodecError, RuntimeError):
    """More than the tolerated fraction of Monte-Carlo replicas raised errors."""
