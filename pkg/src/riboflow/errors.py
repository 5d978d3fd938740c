"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 parse, 3 validation, 4 numeric failure, 5 budget exceeded.
"""


class RiboflowError(Exception):
    exit_code = 4


class ParseError(RiboflowError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(RiboflowError, ValueError):
    exit_code = 3


# model structure
class LoopEdge(ValidationError):
    pass


class DuplicateEdge(ValidationError):
    pass


class BadCapacity(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class BadParameter(ValidationError):
    pass


class BadReference(ValidationError):
    pass


class NotStronglyConnected(ValidationError):
    pass


class MixedPeriods(ValidationError):
    pass


class LevelSetMismatch(ValidationError):
    pass


# numerics
class NumericError(RiboflowError, ArithmeticError):
    exit_code = 4


class NonFiniteInput(NumericError):
    pass


class UnboundedCoefficient(NumericError):
    pass


class StepSizeUnderflow(NumericError):
    pass


class CapacityViolation(NumericError):
    pass


class NonFiniteState(NumericError):
    pass


class EmptyWindow(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class QuadratureFailure(NumericError):
    pass


# budgets
class BudgetExceeded(RiboflowError):
    exit_code = 5


class CycleBudgetExceeded(BudgetExceeded):
    pass


class TooLarge(BudgetExceeded):
    pass
