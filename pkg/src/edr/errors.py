"""Exception types shared across the package.

The CLI maps these onto process exit codes; see `edr.cli`.
"""


class EdrError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(EdrError):
    """A parameter or argument value is outside its valid domain."""


class ShapeError(EdrError):
    """Array or frame geometry does not match what an operation requires."""


class ParseError(EdrError):
    """Input data is malformed.  Carries a byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class FormatError(ParseError):
    """A container has the wrong magic bytes or an unsupported version."""


class ValidationError(ParseError):
    """A container is structurally well-formed but its payload is out of range."""
