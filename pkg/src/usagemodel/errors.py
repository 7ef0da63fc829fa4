"""Exception types shared across the package."""


class UsageModelError(Exception):
    """Base class for all errors raised by this package."""


class LogParseError(UsageModelError):
    """A log line could not be parsed. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateStepError(LogParseError):
    """The same (session, step) appeared twice in a log."""


class StepOrderError(LogParseError):
    """Steps within a session were not strictly increasing."""


class UnknownStateError(UsageModelError):
    """A queried state does not exist in the model."""


class InvalidDistributionError(UsageModelError):
    """An action distribution is empty or malformed where counts are required."""


class InvalidSplitError(UsageModelError):
    """A proposed split violates count conservation or has an empty part."""


class TableTooSmallError(UsageModelError):
    """A sequence table has fewer than two entries and cannot be split."""


class TableTooLargeError(UsageModelError):
    """A sequence table is too large for exhaustive enumeration."""


class ModelFormatError(UsageModelError):
    """A model document is syntactically or structurally malformed."""


class ModelVersionError(ModelFormatError):
    """A model document declares an unsupported format version."""


class ModelIntegrityError(UsageModelError):
    """A model document parsed but violates a model invariant."""


class TruthConfigError(UsageModelError):
    """A ground-truth configuration is invalid or inconsistent."""


class UnreachableStatesWarning(UserWarning):
    """Some declared skeleton states can never be visited by the generator."""
