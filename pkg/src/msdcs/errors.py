"""Exception types shared across the package.

The CLI maps these onto its exit-code table (see cli.py).
"""


class MsdcsError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(MsdcsError, ValueError):
    """A tensor or layer argument has an incompatible shape."""


class ConfigError(MsdcsError):
    """Bad configuration file, key, or value."""


class DataError(MsdcsError):
    """Missing, empty, or unusable input data (images, directories)."""


class DivergenceError(MsdcsError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, batch_index: int | None = None):
        super().__init__(message)
        self.batch_index = batch_index


class ModelMismatchError(MsdcsError):
    """A measurement packet is bound to a different model."""


class FormatError(MsdcsError):
    """A binary file failed integrity or structural checks."""
