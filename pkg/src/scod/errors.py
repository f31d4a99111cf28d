"""Exception types shared across the package."""


class ScodError(Exception):
    """Base class for all package errors."""


class InvalidArgument(ScodError, ValueError):
    pass


class TrainingDiverged(ScodError, RuntimeError):
    pass


class IncompatibleSketch(ScodError, ValueError):
    """Raised when merging accumulators built on different sketch operators."""


class ArtifactMismatch(ScodError):
    """Raised when a monitor, model and data file disagree on dimensions."""
