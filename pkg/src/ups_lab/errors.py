"""Exception types raised by the public API.

Each class maps one documented failure mode, so callers (and the CLI exit-code
table) can tell configuration mistakes from data problems from numerical ones.
"""


class UpsLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidArchitectureError(UpsLabError):
    """Layer dimensions are empty, too short, or non-positive."""


class ShapeError(UpsLabError):
    """Array arguments do not have mutually consistent shapes."""


class ScheduleExhaustedError(UpsLabError):
    """An SGD step was requested past the end of the learning-rate schedule."""


class EmptyBatchError(UpsLabError):
    """No sample in the batch contributes a defined loss."""


class EmptyMaskError(UpsLabError):
    """A per-sample loss was requested with zero selected entries."""


class InvalidTargetError(UpsLabError):
    """Label or mask contents violate the loss preconditions."""


class DegenerateEstimatorError(UpsLabError):
    """The configured uncertainty estimator cannot produce spread."""


class EmptyInputError(UpsLabError):
    """An aggregation was requested over zero samples."""


class InvalidDatasetError(UpsLabError):
    """Dataset contents violate the labeled/unlabeled contract."""


class InvalidParameterError(UpsLabError):
    """A parameter value is outside its documented range."""


class ConfigError(UpsLabError):
    """A run configuration has unknown keys or inconsistent values."""


class CsvSchemaError(UpsLabError):
    """A CSV header does not match the documented schema."""


class CsvParseError(UpsLabError):
    """A CSV row could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
