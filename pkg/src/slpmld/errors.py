"""Exception hierarchy shared by every module of the package."""


class SlpError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SlpError, ValueError):
    """Invalid dimensions, orders, flags or configuration values."""


class InvalidSymbolError(SlpError, ValueError):
    """A symbol does not belong to the constellation it is used with."""


class ContractError(SlpError, ValueError):
    """A documented precondition on an argument was violated."""


class NumericError(SlpError, ArithmeticError):
    """Non-finite input or a numerically broken intermediate result."""


class DegenerateChannelError(NumericError):
    """A received vector or channel is zero where a direction is required."""


class BudgetError(SlpError, RuntimeError):
    """A search would exceed its configured candidate budget."""


class InfeasibleError(NumericError):
    """An optimization problem has no feasible point.

    ``row`` is the index of the first violated constraint row when known.
    """

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ConvergenceError(NumericError):
    """An iterative method ran out of iterations.

    The best iterate and its trace are attached so callers can still inspect them.
    """

    def __init__(self, message: str, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace
