"""Exception types shared across the package."""


class ProxyfitError(Exception):
    """Base class for all package errors."""


class InvariantViolation(ProxyfitError):
    """A data structure failed one of its documented invariants."""


class DimensionMismatch(ProxyfitError):
    """Parameter or array dimensions do not match the model."""


class FileFormatError(ProxyfitError):
    """A serialized artifact is malformed or truncated."""
