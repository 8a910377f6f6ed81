"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: schema problems exit 2, numerical
failures exit 3 and broken internal invariants exit 4.
"""


class UnitDemandError(Exception):
    """Base class for all package errors."""


class InvalidDistributionError(UnitDemandError, ValueError):
    """A distribution spec or table does not describe a valid CDF."""


class DomainError(UnitDemandError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(UnitDemandError, ArithmeticError):
    """A numerical routine failed (no bracket, divergence, no convergence)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InternalInvariantError(UnitDemandError, AssertionError):
    """A result contradicts a proven property; indicates a bug."""


class ConfigError(UnitDemandError, ValueError):
    """A run config failed schema validation."""
