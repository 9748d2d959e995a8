"""Exception hierarchy shared by all modules.

The CLI maps each family to an exit status (see ``EXIT_CODES``).
"""


class CranArqError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(CranArqError, ValueError):
    pass


class InfeasibleParameterError(InvalidParameterError):
    pass


class DegenerateChainError(InvalidParameterError):
    pass


class ConfigError(InvalidParameterError):
    pass


class NumericFailureError(CranArqError, ArithmeticError):
    pass


class ConvergenceError(NumericFailureError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ModelError(CranArqError):
    """The assembled chain is not ergodic (several closed classes)."""


class CapacityError(CranArqError):
    def __init__(self, message, cap=None, reached=None):
        super().__init__(message)
        self.cap = cap
        self.reached = reached


class InternalInvariantError(CranArqError, AssertionError):
    pass


EXIT_CODES = (
    (CapacityError, 4),
    (InvalidParameterError, 2),
    (NumericFailureError, 3),
    (ModelError, 3),
)


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1
