"""Exception types shared across the pipeline."""


class DdccanetError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(DdccanetError):
    """Malformed file content (PGM header, CSV cell, config line, ...)."""


class IoError(DdccanetError):
    """A referenced file is missing or unreadable."""


class ShapeError(DdccanetError):
    """Array dimensions incompatible with the requested operation."""


class EmptyDatasetError(DdccanetError):
    """A manifest produced zero samples."""


class ConfigError(DdccanetError):
    """Invalid configuration value or combination."""


class RecipeError(DdccanetError):
    """View recipe incompatible with the raw input it was applied to."""


class NumericalError(DdccanetError):
    """Numerical failure: non-convergence, non-positive-definite input."""


class CorruptModelError(DdccanetError):
    """Model file failed its checksum or structural validation."""
