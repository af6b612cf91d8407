"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from NvmagError, so
callers (and the command-line tool) can separate domain failures from
programming errors.
"""

__all__ = [
    "NvmagError",
    "DataError",
    "ConfigError",
    "GuessError",
    "InversionError",
    "UnobservableLineWarning",
]


class NvmagError(Exception):
    """Base class for all deliberate failures in this package."""


class DataError(NvmagError):
    """Malformed or inconsistent input data (files, traces, tables)."""


class ConfigError(NvmagError):
    """Invalid or unknown configuration keys or values."""


class GuessError(NvmagError):
    """Automatic peak finding could not produce a usable starting point."""


class InversionError(NvmagError):
    """Field inversion failed from every starting point."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UnobservableLineWarning(UserWarning):
    """A requested transition has negligible drive strength at this field."""
