"""Exception types shared across the package.

The CLI maps these to process exit codes: validation failures exit 2,
precision or certification failures exit 3.
"""


class TorusflowError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(TorusflowError):
    """Invalid input data: bad config, degenerate polytope, bad direction."""


class TransversalityError(ValidationError):
    """Some facet of the polytope is parallel to the flow direction."""

    def __init__(self, message, facets=()):
        super().__init__(message)
        self.facets = tuple(facets)


class DegeneratePolytopeError(ValidationError):
    """Vertex set does not span a full-dimensional convex body."""


class PrecisionError(TorusflowError):
    """Base class for failures that more working precision might fix."""


class PrecisionExhaustedError(PrecisionError):
    """Requested computation cannot be certified at the working precision."""


class TailNotCertifiableError(PrecisionError):
    """A series tail cannot be bounded from the available expansion data."""
