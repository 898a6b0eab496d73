"""Exception hierarchy shared across the package."""


class CbpsaeError(Exception):
    """Base class for all package-specific errors."""


class SingularDesignError(CbpsaeError, ValueError):
    """Design matrix is rank-deficient under the active regression weights.

    ``columns`` lists the 0-based indices of the columns that could not be
    pivoted into the factorization.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class InsufficientDataError(CbpsaeError, ValueError):
    """Too few areas for the requested fit (typically K <= p)."""


class InfeasibleScenarioError(CbpsaeError, ValueError):
    """Simulation scenario parameters are outside their feasible domain."""


class NonFiniteObjectiveError(CbpsaeError, FloatingPointError):
    """An objective function returned a non-finite value.

    ``x`` holds the offending evaluation point.
    """

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class OptimizationError(CbpsaeError, RuntimeError):
    """Optimizer failed to produce a usable point.

    ``best`` carries the best point found before the failure, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
