"""Exception hierarchy shared by all modules."""


class RuinError(Exception):
    """Base class for every error raised by :mod:`bmsruin`."""


class ModelError(RuinError, ValueError):
    """Invalid model input."""


class NonStochasticMatrix(ModelError):
    pass


class NonUniqueStationary(ModelError):
    pass


class InvalidWeights(ModelError):
    pass


class InadmissibleClaimLaw(ModelError):
    """The law's moment function has a branch point or essential singularity,
    or does not exist at all (Cauchy, Pareto, lognormal, non-integer gamma)."""


class SolverError(RuinError, ArithmeticError):
    """Numerical failure in root finding or the linear solve."""


class PoleHit(SolverError):
    pass


class BoundaryTooClose(SolverError):
    pass


class NonIntegerWinding(SolverError):
    pass


class EvaluationOverflow(SolverError):
    """D(s) left the binary64 range on a contour."""


class MultipleRootDetected(SolverError):
    pass


class SearchExhausted(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class NoRealRoot(SolverError):
    pass


class QuadratureFailure(SolverError):
    pass
