"""Exception hierarchy.

Every error raised by the library derives from :class:`EntrofluxError`, which is
itself a ``ValueError`` so callers that only care about bad input can catch that.
"""


class EntrofluxError(ValueError):
    pass


# core linear algebra
class NotHermitian(EntrofluxError):
    pass


class InvalidDensityMatrix(EntrofluxError):
    pass


class SingularForNegativePower(EntrofluxError):
    pass


class SupportViolation(EntrofluxError):
    """Relative entropy is +inf: the first argument leaves the support of the second."""


# maps
class DimensionMismatch(EntrofluxError):
    pass


class NonUniqueInvariant(EntrofluxError):
    pass


class NotPositiveDefinite(EntrofluxError):
    pass


class NotInvariant(EntrofluxError):
    pass


# assumptions / measurements
class AssumptionNotSatisfied(EntrofluxError):
    pass


class NotAProjectorSet(EntrofluxError):
    pass


class NotRankOne(NotAProjectorSet):
    pass


class UndefinedCells(EntrofluxError):
    pass


class AbsoluteIrreversibility(UndefinedCells):
    """A trajectory with positive forward probability has zero backward probability."""


# qubit model
class QuadratureFailure(EntrofluxError):
    pass


class NegativeIntegratedRate(EntrofluxError):
    pass


class DegenerateEigenvector(EntrofluxError):
    pass


class SingularAtPureState(EntrofluxError):
    pass


class DivergentAtZeroGamma(EntrofluxError):
    pass


# io
class ParseError(EntrofluxError):
    pass


class ConfigError(EntrofluxError):
    pass
