"""Exception hierarchy shared by every module.

Each class carries ``exit_code`` so the CLI can map failures to the
documented process status without a lookup table of its own.
"""


class CloseFieldError(Exception):
    exit_code = 1


class ParseError(CloseFieldError, ValueError):
    exit_code = 2


class SpecMismatch(CloseFieldError, ValueError):
    exit_code = 2


class PrecisionLoss(CloseFieldError):
    exit_code = 3

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class NotAUnit(PrecisionLoss):
    pass


class Singular(PrecisionLoss):
    pass


class BudgetExceeded(CloseFieldError):
    exit_code = 4


class VerificationFailure(CloseFieldError):
    exit_code = 5


class NotNClose(CloseFieldError):
    exit_code = 5


class InsufficientCloseness(CloseFieldError):
    exit_code = 5


class NotInCongruenceSubgroup(CloseFieldError, ValueError):
    exit_code = 2


class NotInNeighborhood(CloseFieldError, ValueError):
    exit_code = 2


class NoSolution(CloseFieldError, ValueError):
    exit_code = 2


class WindowOverflow(CloseFieldError):
    exit_code = 4
