"""Exception types shared across the toolkit."""


class TripleTrackError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(TripleTrackError):
    """Vector or tensor shapes are incompatible."""


class InvalidDescriptorError(TripleTrackError):
    """A descriptor is unusable (zero vector or non-finite entries)."""


class ConfigError(TripleTrackError):
    """A configuration is inconsistent or out of range."""


class CostMatrixError(TripleTrackError):
    """A cost matrix contains NaN or negative entries."""


class TrainingDivergenceError(TripleTrackError):
    """A training step produced non-finite loss or gradients.

    The model parameters passed to the failing step are left untouched.
    """


class SequencingError(TripleTrackError):
    """Frames were fed out of order."""


class ParseError(TripleTrackError):
    """A detection/track file line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ExtractionError(TripleTrackError):
    """A bounding box does not intersect its frame."""
