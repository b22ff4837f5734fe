"""Exception hierarchy shared across the package."""


class DevportError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DevportError):
    """Bad user input: shapes, weights, parameters, config files."""


class DimensionMismatch(ValidationError):
    pass


class SpaceMismatch(ValidationError):
    """Objects built on different probability spaces were combined."""


class ParseError(ValidationError):
    """CSV or config input could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class RankDeficient(DevportError):
    """Centered return matrix does not have full row rank."""


class AssumptionViolation(ValidationError):
    """A standing model assumption (positive target, non-zero mean) fails."""


class Unsupported(DevportError):
    """Requested feature is rejected by design (e.g. standard deviation)."""


class GuardExceeded(DevportError):
    """A combinatorial or dimensional safety guard was hit."""


class TooManyScenarios(GuardExceeded):
    pass


class DimensionGuard(GuardExceeded):
    pass


class SpanDeficient(DevportError):
    """Portfolio risk generators do not span the asset space."""


class ZeroRiskPortfolio(DevportError):
    """The candidate portfolio has zero deviation, contradicting the model."""


class NotAnIdentifier(DevportError):
    """A selector produced a point that fails the risk-identifier test."""


class EmptyIntersection(DevportError):
    pass


class UnboundedFace(DevportError):
    """An optimal face is unbounded; carries a ray certificate."""

    def __init__(self, message, ray=None):
        super().__init__(message)
        self.ray = ray


class LpError(DevportError):
    """Solver failure that is not a clean infeasible/unbounded verdict."""


class IterationLimit(LpError):
    pass


class NumericUnderflow(DevportError):
    """All posterior densities underflowed; carries the max log-density."""

    def __init__(self, message, max_log_density=None):
        super().__init__(message)
        self.max_log_density = max_log_density


class DichotomyViolation(DevportError):
    """Forward/inverse uniqueness structure failed a consistency check."""


class InternalCheckError(DevportError):
    """A mathematical invariant that should hold by construction failed."""
