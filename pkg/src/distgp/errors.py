"""Exception types shared across the package."""


class DistGPError(Exception):
    """Base class for all errors raised by distgp."""


class UnsupportedParameterError(DistGPError, ValueError):
    """A parameter value is outside the supported set (e.g. a Matern
    regularity without a closed form)."""


class DomainError(DistGPError, ValueError):
    """An input lies outside the mathematical domain of the operation."""


class ContractViolationError(DistGPError, ValueError):
    """Caller passed data that violates a documented precondition."""


class NumericalDegeneracyError(DistGPError, ArithmeticError):
    """A matrix factorization failed even after jitter was applied."""


class OptimizationFailureError(DistGPError, RuntimeError):
    """Hyperparameter search never saw a finite objective value."""


class DegeneratePartitionError(DistGPError, ValueError):
    """Requested partition cannot be built (e.g. more cells than points)."""


class InsufficientDataError(DistGPError, RuntimeError):
    """An input file holds fewer usable rows than requested."""
