"""Contains the exception hierarchy used throughout sbnar.

Every exception raised on purpose by this library derives from `SbnarError`.
Each subclass also derives from the builtin exception a caller would catch for
the same kind of problem (`ValueError` for bad input, `RuntimeError` for
numerical failure), so code that doesn't know about sbnar still behaves. The
`exit_code` attribute is what the command-line interface returns when the
exception escapes a subcommand.
"""

__all__ = [ #@
    'SbnarError',
    'ConfigError',
    'DataError',
    'CorruptHeaderError',
    'UnsupportedVersionError',
    'DimensionMismatchError',
    'TruncatedPayloadError',
    'IntegrationError',
    'GenerationError',
    'EvaluationError',
]

class SbnarError(Exception):
    """Base class for all sbnar errors."""
    exit_code = 1

class ConfigError(SbnarError, ValueError):
    """Raised when a configuration value is out of range or inconsistent."""
    exit_code = 2

class DataError(SbnarError, ValueError):
    """Raised when an array, dataset, or file does not have the expected
    shape or contents."""
    exit_code = 3

class CorruptHeaderError(DataError):
    """Raised when a dataset file header cannot be parsed."""

class UnsupportedVersionError(DataError):
    """Raised when a dataset file was written with an unknown format
    version."""

class DimensionMismatchError(DataError):
    """Raised when the dimensions recorded in a file header disagree with
    each other or with the payload."""

class TruncatedPayloadError(DataError):
    """Raised when a dataset file ends before its declared payload does."""

class IntegrationError(SbnarError, RuntimeError):
    """Raised when a time integration cannot proceed, usually because the
    state is no longer finite."""
    exit_code = 4

class GenerationError(IntegrationError):
    """Raised when the full model blows up while generating a dataset. The
    index of the offending trajectory is available as `trajectory`."""

    def __init__(self, trajectory, step):
        super().__init__(
            "full model blew up in trajectory {} at step {}".format(trajectory, step))
        self.trajectory = trajectory
        self.step = step

class EvaluationError(SbnarError, ValueError):
    """Raised when a reduced model term cannot be evaluated."""
    exit_code = 4
