"""Exception types shared across the package."""


class VitalnetError(Exception):
    """Base class for all vitalnet errors."""


class ParseError(VitalnetError):
    """Raised when an input file cannot be parsed (carries the line number)."""


class ValidationError(VitalnetError):
    """Raised when parsed data violates a domain invariant."""
