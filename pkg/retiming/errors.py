"""Exceptions raised by the retiming package
"""


class RetimingError(Exception):
    """Base class for every error raised by this package
    """


class InvalidProblem(RetimingError, ValueError):
    """Raised when a problem (or problem file) violates the data model
    """
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class DimensionMismatch(RetimingError, ValueError):
    pass


class NonFiniteCoefficient(RetimingError, ValueError):
    pass


class EmptyVelocityInterval(RetimingError, ValueError):
    """Raised when some sample admits no positive path velocity
    """
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class DegeneratePath(RetimingError, ValueError):
    pass


class UnsupportedDimension(RetimingError, ValueError):
    pass


class RankDeficient(RetimingError, ValueError):
    pass


class EmptyDomain(RetimingError, ValueError):
    pass


class Infeasible(RetimingError, RuntimeError):
    """Raised when no profile satisfies the constraints

    Attributes
    ----------
    step : int or None
        Earliest step at which the propagated feasible set became empty
    rows : list
        Indices of the offending constraint rows at that step
    """
    def __init__(self, message, step=None, rows=None):
        super().__init__(message)
        self.step = step
        self.rows = list(rows or [])


class EmptyFeasible(Infeasible):
    """Raised when a sample's admissible set is empty before any propagation
    """


class NonConvex(RetimingError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class Unbounded(RetimingError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class Untraversable(RetimingError, RuntimeError):
    """Raised when two consecutive samples both have zero path velocity
    """
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class NotConverged(RetimingError, RuntimeError):
    pass
