"""
Custom exception classes for better error handling

Every exception carries the process exit code used by the CLI.
"""

from __future__ import annotations

from typing import Optional


class XaiChestError(Exception):
    """Base exception for the xai-chest laboratory"""
    exit_code: int = 1


class ConfigurationError(XaiChestError):
    """Raised when experiment configuration is invalid"""
    exit_code = 2


class UsageError(XaiChestError):
    """Raised on bad command-line usage"""
    exit_code = 2


class SizeError(XaiChestError, ValueError):
    """Raised when an array length or shape violates a precondition"""
    pass


class DegenerateInputError(XaiChestError, ValueError):
    """Raised on zero power, zero divisors or empty index sets"""
    pass


class BoundsError(XaiChestError, IndexError):
    """Raised when a symbol index falls outside a channel realization"""
    pass


class ModelFormatError(XaiChestError):
    """Raised when a model file cannot be parsed"""
    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None) -> None:
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ModelVersionError(ModelFormatError):
    """Raised when a model file was written by an unsupported format version"""

    def __init__(self, found: int, expected: int) -> None:
        self.found = found
        self.expected = expected
        super().__init__(f"unsupported model format version {found} (expected {expected})", line=1, field="version")


class DatasetFormatError(XaiChestError):
    """Raised when a dataset cache is malformed"""
    exit_code = 3


class ArtifactIOError(XaiChestError):
    """Raised when reading or writing an artifact fails"""
    exit_code = 3


class MissingArtifactError(XaiChestError):
    """Raised when an upstream artifact required by a command does not exist"""
    exit_code = 3

    def __init__(self, path: str, producer: str) -> None:
        self.path = path
        self.producer = producer
        super().__init__(f"missing artifact {path}; produce it with `xai-chest {producer}`")


class NumericError(XaiChestError):
    """Raised when training or estimation produces non-finite values"""
    exit_code = 4
