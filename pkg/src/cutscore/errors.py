"""Exception types raised across the cutscore pipeline.

Every error that callers are expected to catch and act on has its own
class; the CLI maps any :class:`CutscoreError` to exit code 2 (data or
model problem) while flag validation failures exit with code 1.
"""


class CutscoreError(Exception):
    """Base class for all pipeline errors."""


# --- trajectory ingestion ---------------------------------------------------

class MalformedRow(CutscoreError):
    """A CSV row has the wrong column count or a non-numeric field."""


class NonUnitQuaternion(CutscoreError):
    """A quaternion's norm deviates from 1 by more than the ingest tolerance."""


class TooShort(CutscoreError):
    """A trajectory has fewer than 2 frames."""


class DuplicateFrameIndex(CutscoreError):
    """Two rows of one trajectory share a frame index."""


class TooShortForWindow(CutscoreError):
    """A trajectory has fewer frames than one window requires."""


class HeterogeneousWindows(CutscoreError):
    """Windows written together must share row and column counts."""


class EmptyDataset(CutscoreError):
    """An operation received no trajectories or no windows."""


class IoFailure(CutscoreError):
    """An underlying file read or write failed."""


# --- network ----------------------------------------------------------------

class ChannelMismatch(CutscoreError):
    """Input channel count does not match a layer's expected channels."""


class ShapeMismatch(CutscoreError):
    """Tensor shapes are inconsistent with the model or each other."""


class DegenerateBatch(CutscoreError):
    """Batch statistics were requested over fewer than 2 values."""


class StaleCache(CutscoreError):
    """A backward pass was given a cache not produced by a matching
    training-mode forward pass."""


# --- training ---------------------------------------------------------------

class LabelOutOfRange(CutscoreError):
    """A class label lies outside the valid range."""


class EmptyClass(CutscoreError):
    """A class has no trajectories, so stratified splitting is impossible."""


class EmptySplit(CutscoreError):
    """A split required for training ended up empty."""


class ClassCountMismatch(CutscoreError):
    """The model's class count differs from the dataset's."""


class FreezeOutOfRange(CutscoreError):
    """freeze_blocks must lie in 0..4."""


class SchemaVersionMismatch(CutscoreError):
    """A model file declares an unsupported format version."""


class CorruptModelFile(CutscoreError):
    """A model file is syntactically valid but structurally broken."""


# --- baselines and assessment -----------------------------------------------

class EmptyTrainingSet(CutscoreError):
    """A classifier was fit on zero rows."""


class NotAProbabilityVector(CutscoreError):
    """Scoring input is not a valid probability vector over 6 classes."""


class NoWindows(CutscoreError):
    """An action score was requested for zero windows."""


class UnlabeledWindow(CutscoreError):
    """Evaluation requires every window to carry a label."""
