"""Exception types raised across the package."""


class MixsigError(Exception):
    """Base class for all package errors."""


class ParameterError(MixsigError, ValueError):
    """An argument is outside its valid range."""


class DomainError(MixsigError, ValueError):
    """A frequency response was evaluated at its pole."""


class FilterInstabilityError(MixsigError):
    """`I - alpha A` is singular or the resolvent series diverges."""


class AssumptionError(MixsigError):
    """The eigengap condition on the graph set does not hold."""


class DegenerateFilterError(MixsigError):
    """The filter response vanishes somewhere in the passband."""


class NumericalFailure(MixsigError, FloatingPointError):
    """An iterative solver produced a non-finite objective."""


class ConfigError(MixsigError, ValueError):
    """An experiment configuration could not be parsed or validated."""


class DegenerateError(MixsigError, ValueError):
    """An estimate is undefined for the given (e.g. all-zero) input."""
