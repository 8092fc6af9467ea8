"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`; the CLI
maps those to exit code 2. Programming errors (wrong argument types, invalid
keyword values) stay as plain ``ValueError``/``TypeError``.
"""

from __future__ import annotations


class DataError(ValueError):
    """Base class for every data-dependent failure in the pipeline."""


class DimensionMismatch(DataError):
    pass


# --- EDF / annotations -------------------------------------------------------


class EdfError(DataError):
    pass


class TruncatedHeader(EdfError):
    pass


class NonNumericField(EdfError):
    def __init__(self, name: str, raw: str):
        super().__init__(f"header field {name!r} is not numeric: {raw!r}")
        self.name = name
        self.raw = raw


class HeaderValidationError(EdfError):
    """A decoded header violates a structural invariant."""


class InconsistentHeaderBytes(HeaderValidationError):
    pass


class InvalidCalibration(HeaderValidationError):
    pass


class TruncatedDataRecord(EdfError):
    pass


class ChannelLengthMismatch(EdfError):
    pass


class AnnotationError(DataError):
    pass


class NonBinaryAnnotation(AnnotationError):
    def __init__(self, row: int, value: str):
        super().__init__(f"row {row}: annotation value {value!r} is not 0/1")
        self.row = row


class DuplicateTimestamp(AnnotationError):
    def __init__(self, row: int, second: int):
        super().__init__(f"row {row}: second {second} appears more than once")
        self.row = row


# --- preprocessing / features -------------------------------------------------


class EmptyInput(DataError):
    pass


class WindowLongerThanRecording(DataError):
    pass


class WindowOutsideAnnotations(DataError):
    pass


class WindowTooShort(DataError):
    pass


# --- models ------------------------------------------------------------------


class TooFewSamples(DataError):
    pass


class TargetDimExceedsFeatureDim(DataError):
    pass


class SingleClassTrainingSet(DataError):
    pass


class BudgetInfeasible(DataError):
    pass


# --- metrics -----------------------------------------------------------------


class LengthMismatch(DataError):
    pass


class NonBinaryValue(DataError):
    pass


class EmptyEvaluation(DataError):
    pass


class SingleClassLabels(DataError):
    pass


# --- harness -----------------------------------------------------------------


class NoDataFound(DataError):
    pass


class TooFewSegments(DataError):
    pass


class ContainerError(DataError):
    pass


class BadMagic(ContainerError):
    pass


class VersionUnsupported(ContainerError):
    pass


class SectionLengthMismatch(ContainerError):
    pass


class GridCellError(DataError):
    """Wraps a stage failure with the (window, pca_dim) cell that produced it."""

    def __init__(self, window_s: int, pca_dim: int, cause: Exception):
        super().__init__(f"grid cell w={window_s} d={pca_dim}: {type(cause).__name__}: {cause}")
        self.window_s = window_s
        self.pca_dim = pca_dim
        self.cause = cause
