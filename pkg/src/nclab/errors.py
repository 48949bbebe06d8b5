"""Exception hierarchy.

Errors fall in two families that the command line maps to different exit
codes: configuration/validation problems (exit 2) and numerical failures
(exit 3).
"""


class NclabError(Exception):
    """Base class for all package errors."""


class ValidationError(NclabError, ValueError):
    """Input does not describe an admissible plant, channel or config."""


class NotSorted(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotStabilizable(ValidationError):
    pass


class StableEigenvalue(ValidationError):
    pass


class OrderViolation(ValidationError):
    """Eigenvalue log-magnitudes passed in the wrong order."""


class ConfigError(ValidationError):
    pass


class NotControllable(ValidationError):
    pass


class UnsupportedSystem(ValidationError):
    """The simulator only handles real, diagonal plants."""


class NumericalError(NclabError, ArithmeticError):
    """A well-posed request has no numerical answer."""


class NoRoot(NumericalError):
    pass


class DegenerateEqualMagnitudes(NumericalError):
    pass


class CapExceeded(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class DivergentMoment(NumericalError):
    pass


class EmptyAudit(NumericalError):
    pass


class Overflow(NumericalError):
    """Raised by the controller when the reconstructed state blows up."""


class ParseError(ConfigError):
    """Config text is not valid JSON."""


class SchemaError(ConfigError):
    """Config has a missing, unknown or out-of-range field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
