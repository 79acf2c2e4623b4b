"""Exception hierarchy shared across the package."""


class AdaGraphError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(AdaGraphError):
    """Shapes or vector lengths do not compose."""


class InvalidMetadata(AdaGraphError):
    """Metadata vector contains NaN or infinite components."""


class DuplicateNode(AdaGraphError):
    """A node with the same id already exists in the graph."""


class EmptyGraphError(AdaGraphError):
    """No parameterized neighbor is available for propagation."""


class UnknownDomain(AdaGraphError):
    """Domain id not present in the normalization state."""


class InsufficientBatch(AdaGraphError):
    """Batch too small for the requested statistic."""


class LabelError(AdaGraphError):
    """Missing or out-of-range class label."""


class InvalidState(AdaGraphError):
    """Operation invoked on an object in the wrong lifecycle state."""


class EmptyDataset(AdaGraphError):
    """A domain dataset is empty where samples are required."""


class DegenerateTask(AdaGraphError):
    """Task is trivially unsolvable (e.g. one-class classification)."""


class NodeSetMismatch(AdaGraphError):
    """Classifier classes and graph nodes disagree."""


class BufferNotReady(AdaGraphError):
    """Refinement buffer is not full yet."""


class ConfigError(AdaGraphError):
    """Invalid or unknown configuration entry."""
