"""Exception types raised across the package."""

from __future__ import annotations


class HSCMError(Exception):
    """Base class for all package errors."""


class SchemaError(HSCMError):
    """The knowledge-base document is malformed.

    ``line`` and ``column`` are set when the failure came from the JSON
    decoder.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(HSCMError):
    """A loaded knowledge base violates one of its invariants."""

    def __init__(self, report):
        self.report = report
        lines = [f"{f.path}: {f.message}" for f in report.errors]
        super().__init__("knowledge base failed validation:\n  " + "\n  ".join(lines))


class KBInvalid(ValidationError):
    """Raised by the parser when handed a knowledge base with errors."""


class EncodingError(HSCMError):
    """Input text is not valid UTF-8."""


class UnknownNode(HSCMError, KeyError):
    def __str__(self) -> str:
        return f"unknown node id: {self.args[0]!r}"


class UnknownReference(HSCMError):
    """A grammar constraint names a node or class that does not exist."""


class NotInConflict(HSCMError):
    """Precedence was requested for two instances with disjoint spans."""


class IndexOutOfRange(HSCMError, IndexError):
    pass
