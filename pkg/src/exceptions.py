"""
Exception hierarchy shared by all packages.
"""

from typing import Optional


class SkeletonAttackError(Exception):
    """Base class for every error raised by this project."""


class ValidationError(SkeletonAttackError, ValueError):
    """An invariant of a skeleton, model, dataset or configuration does not hold."""


class FileFormatError(ValidationError):
    """A file could not be parsed; carries the file path and offending field."""

    def __init__(self, message: str, path: Optional[str] = None, field: Optional[str] = None):
        self.path = str(path) if path is not None else None
        self.field = field
        location = ": ".join(part for part in (self.path, field) if part)
        super().__init__(f"{location}: {message}" if location else message)


class MotionFormatError(FileFormatError):
    """Malformed motion or dataset file."""


class ModelFormatError(FileFormatError):
    """Malformed classifier or emotion-extractor file."""


class AttackError(SkeletonAttackError):
    """An attack cannot be run on the given sample."""
