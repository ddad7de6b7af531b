"""Exception hierarchy shared across the package."""


class CityLayoutError(Exception):
    """Base class for all citylayout errors."""


class InvalidGeometry(CityLayoutError):
    """Degenerate or self-intersecting geometry."""


class InvalidParams(CityLayoutError):
    """Shape template parameters outside their valid range."""


class BlockTooDense(CityLayoutError):
    """Block does not fit the fixed slot grid."""


class NonPositiveHeight(CityLayoutError):
    """Building height must be strictly positive."""


class EmptyDataset(CityLayoutError):
    """No usable samples survived loading or filtering."""


class EmptyDistribution(CityLayoutError):
    """A distance over empirical distributions received an empty sample."""


class AlignmentError(CityLayoutError):
    """Generated and reference collections differ in length."""


class ShapeError(CityLayoutError):
    """Tensor or feature dimension mismatch."""


class CorruptCheckpoint(CityLayoutError):
    """Checkpoint file is truncated, versioned wrong, or shape-inconsistent."""


class IngestIOError(CityLayoutError):
    """Input file unreadable or unparseable."""
