"""Exception types shared across the toolkit."""


class EgoEngageError(Exception):
    """Base class for every toolkit-specific error."""


# --- flow files and estimation ---------------------------------------------

class BadMagic(EgoEngageError):
    """Stream does not start with the EEFL magic bytes."""


class VersionUnsupported(EgoEngageError):
    """EEFL header declares a format version this reader does not know."""


class TruncatedPayload(EgoEngageError):
    """Byte count of the stream does not match what the header implies."""


class NonFiniteValue(EgoEngageError):
    """Flow payload contains NaN or infinity."""


class MismatchedDimensions(EgoEngageError):
    """Input images disagree in shape or are not divisible by the grid."""


class TooFewFrames(EgoEngageError):
    """Flow estimation needs at least two frames."""


# --- descriptors ------------------------------------------------------------

class IndexOutOfRange(EgoEngageError):
    """Evaluation-grid index maps outside the flow sequence."""


class EmptyInterval(EgoEngageError):
    """Interval spans zero evaluation frames."""


class OutOfRange(EgoEngageError):
    """Interval extends outside the available frame range."""


# --- forest -----------------------------------------------------------------

class EmptyTrainingSet(EgoEngageError):
    """No training samples supplied."""


class LabelOutOfRange(EgoEngageError):
    """A training label is negative or >= the declared class count."""


class DimensionMismatch(EgoEngageError):
    """Feature vector length differs from the model's feature count."""


# --- proposals, pipeline ----------------------------------------------------

class EmptyInput(EgoEngageError):
    """Operation requires a nonempty confidence vector."""


class SingleClassTrainingData(EgoEngageError):
    """Training data contains only one class."""


class EmptyDataset(EgoEngageError):
    """No videos available for training."""


class GridMismatch(EgoEngageError):
    """Video grid shape differs from the model's configuration."""


# --- metrics ----------------------------------------------------------------

class LengthMismatch(EgoEngageError):
    """Binary frame vectors differ in length."""


class InconsistentSet(EgoEngageError):
    """Interval set contains overlapping intervals."""


# --- ground truth -----------------------------------------------------------

class IntervalOutOfVideo(EgoEngageError):
    """Annotation mark extends beyond the end of the video."""
