"""Exception taxonomy shared across the package.

Every domain error derives from CccPipeError so callers can catch one type
at the boundary (the CLI maps them to exit code 1, the service to 4xx).
"""


class CccPipeError(Exception):
    """Base class for all domain errors raised by this package."""


class DimensionMismatch(CccPipeError):
    """Two masks or images that must share a shape do not."""


class ShapeMismatch(CccPipeError):
    """An image does not have the dimensions a backend requires."""


class DegeneratePolygon(CccPipeError):
    """A polygon with fewer than three vertices."""


class MalformedLine(CccPipeError):
    """A segmentation label line that cannot be parsed."""


class InsufficientRecords(CccPipeError):
    """Too few records to perform the requested split."""


class InsufficientFolds(CccPipeError):
    """Fold aggregation needs at least two folds."""


class UndefinedMetric(CccPipeError):
    """A classification metric whose denominator is zero."""


class EmptyEvaluation(CccPipeError):
    """An evaluation over zero ground-truth instances."""


class EmptyClusterMask(CccPipeError):
    """Overlap percentage against a cluster mask with zero area."""


class EmptyDataset(CccPipeError):
    """An operation that needs at least one input record."""


class InvalidSpec(CccPipeError):
    """A synthetic SceneSpec with contradictory fields."""


class BackendUnavailable(CccPipeError):
    """An inference backend whose runtime or model asset is missing."""


class EmptyProposal(CccPipeError):
    """Mask proposal found no usable component inside the box."""


class BoxOutOfBounds(CccPipeError):
    """An annotation box that leaves the image or is too small."""


class InvalidTransition(CccPipeError):
    """An annotation state change the task state machine forbids."""


class UnknownRecord(CccPipeError):
    """A record id that does not exist in the dataset."""
