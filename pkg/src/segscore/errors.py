"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented contract (bad values, shapes, or ranges)."""


class FormatError(ValidationError):
    """Byte stream is not a valid single-file NIfTI-1 volume."""
