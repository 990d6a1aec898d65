"""Exception types shared across the package."""


class PandsError(Exception):
    """Base class for every error raised by this package."""


class ModelFormatError(PandsError):
    """A model description is malformed or uses an unknown schema version."""


class DomainError(PandsError):
    """A table-backed rate function was evaluated outside its declared domain."""


class UsageError(PandsError):
    """An operation was called with arguments that violate its contract."""


class CapabilityError(PandsError):
    """The model lacks data required by the requested analysis."""


class StructureError(PandsError):
    """A graph, order, or state violates a structural requirement."""


class UnsupportedFeatureError(PandsError):
    """The input uses a recognized feature that this engine does not support."""


class ResourceError(PandsError):
    """A configured state-count or iteration budget was exceeded."""


class ConvergenceError(PandsError):
    """An iterative solver failed to reach the required residual."""


class DeadlockError(PandsError):
    """A simulation reached a state with zero total event rate."""
