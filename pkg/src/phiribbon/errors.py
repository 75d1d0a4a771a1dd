"""Exception hierarchy shared by all modules."""


class PhiRibbonError(Exception):
    """Base class for all library errors."""


class ShapeMismatch(PhiRibbonError):
    pass


class NegativeProbability(PhiRibbonError):
    pass


class NotNormalized(PhiRibbonError):
    pass


class BadCoordinate(PhiRibbonError):
    pass


class ArityMismatch(PhiRibbonError):
    pass


class BadParameter(PhiRibbonError):
    pass


class DomainViolation(PhiRibbonError):
    pass


class NotBipartite(PhiRibbonError):
    pass


class NotIndependent(PhiRibbonError):
    pass


class BadLambda(PhiRibbonError):
    pass


class NonGeneric(PhiRibbonError):
    pass


class BadShape(PhiRibbonError):
    pass


class NotCorrelationMatrix(PhiRibbonError):
    pass


class GridTooLarge(PhiRibbonError):
    pass


class PhiNotClassF(UserWarning):
    """Search proceeds, but tensorization guarantees no longer apply."""
