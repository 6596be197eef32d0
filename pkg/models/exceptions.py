"""
Exception hierarchy shared by every solver module.

Configuration, ingestion and usage problems map to CLI exit status 2;
numerical failures map to exit status 3.
"""
from typing import Optional


class FreeBoundaryError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FreeBoundaryError, ValueError):
    """Invalid problem or run configuration.

    Attributes:
        key: Dotted path of the offending configuration key, when known.
    """

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def __str__(self) -> str:
        message = super().__str__()
        if self.key and self.key not in message:
            return f"{self.key}: {message}"
        return message


class DomainTooSmallError(ConfigurationError):
    """The lattice has no interior node for the given domain and spacing."""


class IngestionError(FreeBoundaryError, ValueError):
    """Malformed external data (CSV fields, boundary tables)."""


class UsageError(FreeBoundaryError, ValueError):
    """An operation was requested outside of its supported domain."""


class ContractViolation(FreeBoundaryError, ValueError):
    """A caller broke an operation's precondition."""


class UndefinedDistanceError(FreeBoundaryError, ValueError):
    """A set distance was requested for an empty point set."""


class NumericalFailure(FreeBoundaryError, RuntimeError):
    """A solver hit a non-recoverable numerical problem.

    Attributes:
        report: Diagnostic payload from the failing module.
    """

    def __init__(self, message: str, report: Optional[dict] = None):
        super().__init__(message)
        self.report = report or {}


class EstimationFailure(NumericalFailure):
    """Monte-Carlo estimation produced no usable episode."""


class NoDeadCoreError(ConfigurationError):
    """Radial data violate the compatibility condition; no dead core exists."""
