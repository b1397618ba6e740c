"""Exception hierarchy shared by every module."""


class FairDivError(Exception):
    """Base class for all package errors."""


class DomainError(FairDivError, ValueError):
    """Argument outside the domain of a generator or conjugate."""


class AbsoluteContinuityError(FairDivError, ValueError):
    """Reference measure is zero on a cell where the other measure is not."""


class InsufficientSamples(FairDivError, ValueError):
    pass


class EmptyDataset(FairDivError, ValueError):
    pass


class ShapeError(FairDivError, ValueError):
    pass


class ConvergenceError(FairDivError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance.

    The last iterate and its residual are kept so callers can decide
    whether the approximate answer is usable.
    """

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


class InfeasibleBudget(FairDivError, RuntimeError):
    """No training iterate met the fairness budget."""

    def __init__(self, message, best_fairness=None, best_risk=None, model=None):
        super().__init__(message)
        self.best_fairness = best_fairness
        self.best_risk = best_risk
        self.model = model
