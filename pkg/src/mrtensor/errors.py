"""Exception hierarchy shared across the package."""


class MrTensorError(Exception):
    """Base class for all mrtensor errors."""


class FormatError(MrTensorError):
    """Malformed or inconsistent on-disk data (tensor or model files)."""


class ValidationError(MrTensorError):
    """Invalid in-memory data, configuration, or argument."""


class DegenerateSplitError(ValidationError):
    """A requested split leaves some slice with no training pairs."""


class UndefinedMetricError(ValidationError):
    """A metric is undefined for the given inputs (e.g. no positives)."""


class NumericalError(MrTensorError):
    """Non-finite values or solver failure during numerical computation."""
