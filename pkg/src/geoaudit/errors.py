"""Exception types shared across the package."""


class GeoAuditError(Exception):
    """Base class for all package errors."""


class DimensionError(GeoAuditError, ValueError):
    """Input shapes do not agree."""


class DataError(GeoAuditError, ValueError):
    """Dataset content violates a precondition (empty, non-binary target, bad rows)."""


class ConfigError(GeoAuditError, ValueError):
    """Invalid configuration value or file."""


class NumericError(GeoAuditError, ArithmeticError):
    """Training produced a non-finite loss or parameter."""
