"""Exception types shared across the package."""


class MmwaveMdpError(Exception):
    """Base class for all package errors."""


class ValidationError(MmwaveMdpError, ValueError):
    """An input violates a documented precondition or invariant."""


class DegeneracyError(MmwaveMdpError):
    """A chain or system has no unique solution (e.g. reducible chain)."""


class CalibrationError(MmwaveMdpError):
    """Channel calibration could not satisfy its constraints."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SizeLimitError(MmwaveMdpError):
    """An enumeration or search would exceed its configured budget."""


class UnsupportedError(MmwaveMdpError):
    """A parameter is outside the range the implementation covers."""


class ConfigError(MmwaveMdpError):
    """An experiment configuration is malformed or inconsistent."""
