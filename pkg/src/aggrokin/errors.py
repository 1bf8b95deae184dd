"""Exception types shared across the package.

Every error raised on a violated precondition or a failed internal
consistency check derives from :class:`AggrokinError`, so callers (and the
CLI) can distinguish model/configuration problems from genuine bugs.
"""

__all__ = [
    "AggrokinError",
    "DomainError",
    "InvalidPotentialError",
    "ResolutionError",
    "ConfigurationError",
    "IntegrationError",
    "ContractionError",
    "ConsistencyError",
    "CapacityError",
    "RegimeError",
    "InsufficientDataError",
]


class AggrokinError(Exception):
    """Base class for all package errors."""


class DomainError(AggrokinError):
    """Argument outside the mathematical domain of an operation."""


class InvalidPotentialError(AggrokinError):
    """Kernel fails a structural requirement (sign, symmetry, finiteness)."""


class ResolutionError(AggrokinError):
    """Grid or time mesh too coarse for the requested operation."""


class ConfigurationError(AggrokinError):
    """Inputs violate a documented precondition of an experiment or check."""


class IntegrationError(AggrokinError):
    """Time stepping produced a non-finite value."""


class ContractionError(AggrokinError):
    """Fixed-point iteration failed to contract."""


class ConsistencyError(AggrokinError):
    """Cached state disagrees with a from-scratch recomputation."""


class CapacityError(AggrokinError):
    """Population exceeded the configured hard cap.

    Carries whatever partial results were accumulated before the cap was
    hit in the ``partial`` attribute.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RegimeError(AggrokinError):
    """Parameters outside the regime in which a construction is defined."""


class InsufficientDataError(AggrokinError):
    """Not enough data points for the requested statistic or fit."""
