"""Library exception hierarchy.

The three branches mirror the CLI exit-code contract: usage errors exit 1,
data errors exit 2, numerical failures exit 3.
"""


class SurvBVError(Exception):
    """Base class for all survbv errors."""

    exit_code = 2


class UsageError(SurvBVError):
    """Bad flags, malformed config files, unknown config keys."""

    exit_code = 1


class DataError(SurvBVError):
    """The input data cannot support the requested operation."""

    exit_code = 2


class NumericalError(SurvBVError):
    """The computation itself failed (divergence, calibration, degeneracy)."""

    exit_code = 3


class DimensionMismatch(DataError):
    pass


class NoEvents(DataError):
    pass


class NoComparablePairs(DataError):
    pass


class TooFewReplicates(DataError):
    pass


class EmptyInput(DataError):
    pass


class InsufficientData(DataError):
    pass


class TooManyDegenerateDraws(DataError):
    pass


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class EmptyAfterFiltering(DataError):
    pass


class Diverged(NumericalError):
    pass


class DegenerateFold(NumericalError):
    pass


class CalibrationFailed(NumericalError):
    pass
