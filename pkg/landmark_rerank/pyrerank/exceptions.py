"""Exceptions for the pyrerank library."""

from __future__ import annotations


class RerankError(Exception):
    """Base exception for re-ranking errors."""


class RerankValidationError(RerankError):
    """Input violates an invariant or precondition."""


class RerankDimensionError(RerankValidationError):
    """Embedding dimensions or vector lengths do not line up."""


class RerankFormatError(RerankValidationError):
    """Malformed file content, reported with its location."""

    def __init__(
        self,
        message: str,
        path: str | None = None,
        row: int | None = None,
        field: int | str | None = None,
    ) -> None:
        """Initialize with optional location details."""
        self.path = path
        self.row = row
        self.field = field

        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        if field is not None:
            location.append(f"field {field}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class RerankIOError(RerankError):
    """Error reading or writing an artifact."""
