"""Exception and warning types raised by hyperdiffuse."""


class HyperdiffuseError(Exception):
    """Base class for all library errors."""


class HypergraphError(HyperdiffuseError, ValueError):
    pass


class IndexOutOfRange(HypergraphError, IndexError):
    pass


class EmptyHyperedge(HypergraphError):
    pass


class DuplicateVertex(HypergraphError):
    pass


class WeightOutOfRange(HypergraphError):
    pass


class VertexCountMismatch(HypergraphError):
    pass


class DegenerateFeatures(HyperdiffuseError, ValueError):
    """All pairwise feature distances are zero, so no kNN scale exists."""


class NonFiniteRho(HyperdiffuseError, ArithmeticError):
    pass


class DimensionMismatch(HyperdiffuseError, ValueError):
    pass


class SizeCapExceeded(HyperdiffuseError, MemoryError):
    """A dense N x N materialization was requested above the configured cap."""


class EmptyMask(HyperdiffuseError, ValueError):
    pass


class KTooLarge(HyperdiffuseError, ValueError):
    pass


class BoundViolation(HyperdiffuseError, AssertionError):
    """An empirical quantity exceeded its theoretical bound."""


class ConfigError(HyperdiffuseError, ValueError):
    pass


class DataError(HyperdiffuseError, OSError):
    pass


class ZeroDegreeWarning(UserWarning):
    """Vertices with zero degree in the non-renormalized transition matrix."""
