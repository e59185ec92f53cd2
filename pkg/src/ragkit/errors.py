"""Shared exception types."""


class RagkitError(Exception):
    """Base class for domain errors raised by this package."""


class SchemaError(RagkitError):
    """A JSON document does not match the expected on-disk schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
