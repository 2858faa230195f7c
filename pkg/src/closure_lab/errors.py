"""Exception hierarchy.

Validation problems (bad inputs, violated preconditions) derive from
``ValueError``; numerical failures carry a ``diagnostics`` mapping so the
experiment driver can serialize them.
"""


class ClosureLabError(Exception):
    pass


class ValidationError(ClosureLabError, ValueError):
    pass


class NumericalFailure(ClosureLabError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NotConverged(NumericalFailure):
    pass


class NotCrossed(NumericalFailure):
    pass


class EscapeError(NumericalFailure):
    pass


class StarvationError(NumericalFailure):
    pass


class ChartInversionError(NumericalFailure):
    pass


class NonMonotoneError(NumericalFailure):
    pass


class TowerBlowup(NumericalFailure):
    pass
