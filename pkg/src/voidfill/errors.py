"""Exception hierarchy shared by every voidfill module."""


class VoidFillError(Exception):
    """Base class for all errors raised by voidfill."""


class RasterFormatError(VoidFillError, ValueError):
    """Input bytes do not describe a valid raster."""


class MalformedHeader(RasterFormatError):
    pass


class CountMismatch(RasterFormatError):
    pass


class NonNumericToken(RasterFormatError):
    pass


class UnsupportedMagic(RasterFormatError):
    pass


class MaxvalNot255(RasterFormatError):
    pass


class TruncatedPayload(RasterFormatError):
    pass


class DimensionMismatch(VoidFillError, ValueError):
    pass


class NoKnownCells(VoidFillError, ValueError):
    pass


class AllVoid(NoKnownCells):
    """The fill problem has no Dirichlet data at all."""


class HasNodata(VoidFillError, ValueError):
    pass


class NotSPD(VoidFillError, ValueError):
    pass


class MethodIncompatible(VoidFillError, ValueError):
    pass


class DegenerateGeometry(VoidFillError, ValueError):
    pass


class EmptyRegion(VoidFillError, ValueError):
    pass


class TruthHasNodata(VoidFillError, ValueError):
    pass


class Unreachable(VoidFillError, RuntimeError):
    """A coverage band could not be hit within the retry budget."""


class DegenerateRangeWarning(UserWarning):
    """A min-max normalization met a constant field and fell back to a fixed value."""
