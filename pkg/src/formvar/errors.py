"""Exception types shared across the package."""


class FormvarError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(FormvarError, ValueError):
    pass


class DegreeOverflow(FormvarError, ValueError):
    pass


class DegreeUnderflow(FormvarError, ValueError):
    pass


class DegreeMismatch(FormvarError, ValueError):
    pass


class NotConvex(FormvarError, ValueError):
    pass


class IllConditioned(FormvarError, ArithmeticError):
    pass


class GridMismatch(FormvarError, ValueError):
    pass


class TopDegree(FormvarError, ValueError):
    pass


class DegreeZero(FormvarError, ValueError):
    pass


class BadExponent(FormvarError, ValueError):
    pass


class BadDegree(FormvarError, ValueError):
    pass


class EvalError(FormvarError, ValueError):
    pass


class SolverDiverged(FormvarError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FrequencyVsResolution(FormvarError, ValueError):
    pass


class InadmissibleExponents(FormvarError, ValueError):
    pass


class BoundaryTrace(FormvarError, ValueError):
    pass


class NotCoercive(FormvarError, ValueError):
    pass


class MaxIterations(FormvarError, ArithmeticError):
    pass
