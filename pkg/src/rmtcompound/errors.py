"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` used by the command line front end:
2 for validation problems, 3 for numerical failures, 4 for I/O problems.
"""


class RMTError(Exception):
    exit_code = 3


class ValidationError(RMTError, ValueError):
    exit_code = 2


class NumericalError(RMTError, ArithmeticError):
    exit_code = 3


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DataError(ValidationError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class PartitionError(ValidationError):
    def __init__(self, message, minimum=None):
        super().__init__(message)
        self.minimum = minimum


class ShapeError(ValidationError):
    pass


class DegenerateError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularError(NumericalError):
    pass


class RankError(NumericalError):
    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class DomainError(ValidationError):
    pass


class PrecisionError(NumericalError):
    """Raised when a special function cannot reach the requested accuracy.

    ``value`` holds the best-effort result and ``error`` its estimated
    relative error, so callers may choose to continue.
    """

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class ParamError(ValidationError):
    pass


class IntegrationError(NumericalError):
    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class ExistenceError(ValidationError):
    pass


class UnsupportedError(ValidationError):
    pass


class PlanError(ValidationError):
    pass


class FitError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class EvalError(NumericalError):
    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class BoundaryWarning(UserWarning):
    """A fitted parameter ended on (or within tolerance of) its bound."""


class InputOutputError(RMTError, OSError):
    """File could not be read or written."""

    exit_code = 4
