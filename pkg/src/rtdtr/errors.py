"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
DiagnosticError -> 4.
"""


class RtdtrError(Exception):
    """Base class for package errors."""


class ConfigError(RtdtrError):
    """Invalid configuration: bad dimensions, ranges, missing fields."""


class DataError(RtdtrError):
    """Malformed or invariant-violating data (files, records)."""


class DiagnosticError(RtdtrError):
    """A run-time diagnostic failed (dead chain, degenerate weights)."""
