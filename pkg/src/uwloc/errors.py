"""Exception hierarchy shared by the analytic, simulation and CLI layers."""


class UwlocError(Exception):
    """Base class for all package errors."""


class ConfigError(UwlocError, ValueError):
    """Invalid configuration or mismatched inputs (CLI exit code 2)."""


class DomainError(UwlocError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(UwlocError, ArithmeticError):
    """A numerical routine failed (CLI exit code 3)."""


class ModelViolationError(NumericError):
    """A computed quantity contradicts an analytic bound of the model."""


class SingularFimError(NumericError):
    """Fisher information matrix is not invertible (e.g. collinear anchors)."""
