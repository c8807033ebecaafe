"""Exception types shared across the package.

Each maps to a CLI exit code (see ``chaoscover.cli``).
"""


class ChaosCoverError(Exception):
    exit_code = 1


class InvalidInputError(ChaosCoverError, ValueError):
    exit_code = 2


class BudgetExceededError(ChaosCoverError):
    exit_code = 3


class NumericError(ChaosCoverError, ArithmeticError):
    exit_code = 4


class CensoredSampleError(ChaosCoverError):
    """A simulation hit its step cap before finishing."""

    exit_code = 5

    def __init__(self, message, steps=None):
        super().__init__(message)
        self.steps = steps
