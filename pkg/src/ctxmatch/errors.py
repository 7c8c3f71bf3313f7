"""Exception types shared across the package."""


class CtxMatchError(Exception):
    """Base class for all library errors."""


class ParseError(CtxMatchError):
    """A file could not be parsed into the expected format."""


class DegenerateGeometryError(CtxMatchError):
    """Geometric input too degenerate for the requested operation."""


class ModelFitError(DegenerateGeometryError):
    """Model estimation failed (rank deficient or ill conditioned sample)."""
