"""Exception hierarchy shared across modules.

``ValueError`` subclasses signal bad input (CLI exit code 2); ``NumericalError``
subclasses signal a numerical failure (exit code 3).
"""


class NumericalError(RuntimeError):
    pass


class FactorizationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class SpectralInconsistencyError(NumericalError):
    pass


class GridCapError(ValueError):
    pass


class ValidityError(ValueError):
    """Requested energy range is not resolved by the discretization."""


class UnboundedSublevelError(ValueError):
    """Sublevel set of the weight does not fit in any box up to the cap."""


class InfeasibleFitError(RuntimeError):
    """No equivalence constant up to the search ceiling satisfies every row."""

    def __init__(self, where: float, message: str):
        super().__init__(message)
        self.where = where
