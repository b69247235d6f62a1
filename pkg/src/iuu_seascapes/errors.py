"""Exception types shared across the pipeline.

Each class maps to one CLI exit code (see ``iuu_seascapes.cli``).
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ArgumentError(PipelineError, ValueError):
    """An argument is outside the operation's domain."""

    exit_code = 2


class FormatError(PipelineError):
    """An input file does not follow its declared text format."""

    exit_code = 2


class ValidationError(PipelineError):
    """Input parsed but violates a domain invariant."""

    exit_code = 2


class MalformedGeometryError(FormatError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class IngestionError(PipelineError):
    """Too many malformed records in an input file."""

    exit_code = 2


class UsageError(PipelineError):
    exit_code = 2


class TrainingError(PipelineError):
    exit_code = 3


class EvaluationError(PipelineError):
    exit_code = 3


class NetworkError(PipelineError):
    exit_code = 4

    def __init__(self, url, attempts, cause=None):
        self.url = url
        self.attempts = attempts
        self.cause = cause
        super().__init__(f"request to {url} failed after {attempts} attempt(s): {cause}")
