"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``NumericError`` (and subclasses) -> 3, ``ResourceError`` -> 4.
"""


class HetspikeError(Exception):
    """Base class for all library errors."""


class DomainError(HetspikeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(HetspikeError, ValueError):
    """An operation was called with inconsistent or unsupported inputs."""


class ConfigError(HetspikeError, ValueError):
    """A configuration document failed validation."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.message = message
        self.path = path


class NumericError(HetspikeError, ArithmeticError):
    """A computation produced NaN/inf or otherwise broke down numerically."""


class SolverError(NumericError):
    """The saddle-point solver failed to converge from every start."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConvergenceError(NumericError):
    """An iterative routine hit its iteration cap."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(NumericError):
    """An iterative estimator blew up."""


class DegenerateInputError(NumericError):
    """Input carries no usable information (e.g. all-zero matrix)."""


class ResourceError(HetspikeError, MemoryError):
    """A request would exceed the configured memory or state-space budget."""


class ExperimentAborted(HetspikeError):
    """More than half of all Monte Carlo trials failed."""
