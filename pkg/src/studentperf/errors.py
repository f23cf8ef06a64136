"""Exception types raised across the pipeline.

Every error the library raises deliberately derives from StudentPerfError,
so callers (notably the CLI) can map failures to exit codes in one place.
"""


class StudentPerfError(Exception):
    """Base class for all deliberate pipeline errors."""


# --- dataset ingestion ---

class MalformedRow(StudentPerfError):
    """Row does not match the 33-column schema (count or field type)."""


class UnknownCategory(StudentPerfError):
    """Categorical value not present in the declared category set."""


class GradeOutOfRange(StudentPerfError):
    """Grade value outside the 0..20 score range."""


class EmptyInput(StudentPerfError):
    """Input stream carries no data rows."""


class RatioOutOfRange(StudentPerfError):
    """Split ratio outside its allowed interval."""


class DatasetTooSmall(StudentPerfError):
    """A split partition came out empty although its ratio is positive."""


# --- statistics ---

class TooFewSamples(StudentPerfError):
    """Not enough observations for the requested estimator."""


class ConstantColumn(StudentPerfError):
    """Higher moments are undefined on a constant column."""


class ConstantInput(StudentPerfError):
    """Correlation undefined when one input has zero variance."""


class LengthMismatch(StudentPerfError):
    """Paired vectors differ in length."""


class TooFewRows(StudentPerfError):
    """Matrix has fewer rows than the operation requires."""


class UnknownTarget(StudentPerfError):
    """Requested target column absent from the correlation labels."""


class KTooLarge(StudentPerfError):
    """Requested ranking size exceeds the number of candidate columns."""


# --- neural network ---

class ShapeMismatch(StudentPerfError):
    """Operand shapes are incompatible."""


class NonFiniteInput(StudentPerfError):
    """NaN or Inf encountered at a module boundary."""


class IncompatibleWidths(StudentPerfError):
    """Adjacent dense layers disagree on width."""


class EmptySpec(StudentPerfError):
    """Network specification contains no layers."""


class StaleCache(StudentPerfError):
    """Forward cache does not match the network it is replayed against."""


class NonPositiveLearningRate(StudentPerfError):
    """Learning rate must be strictly positive."""


class VersionMismatch(StudentPerfError):
    """Serialized model carries an unsupported format version."""


class CorruptPayload(StudentPerfError):
    """Serialized model cannot be decoded."""


# --- training harness ---

class EmptyTrainingSet(StudentPerfError):
    """Training partition has no rows."""


class WidthMismatch(StudentPerfError):
    """Network width does not match the dataset."""


class EmptyTestSet(StudentPerfError):
    """Evaluation partition has no rows."""


class EmptyHistory(StudentPerfError):
    """Training history holds no epochs."""
