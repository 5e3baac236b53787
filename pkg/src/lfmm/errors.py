"""Exception types shared across the toolkit.

All of these map to exit code 2 in the command line interface; a failed
conservation check is a result, not an error, and maps to exit code 1.
"""

from __future__ import annotations


class LfmmError(Exception):
    """Base class for toolkit errors."""


class FormatError(LfmmError):
    """A file could not be parsed. Carries path and row context in the message."""


class ConfigError(LfmmError):
    """A configuration value is out of its allowed range or inconsistent."""


class ValidationError(LfmmError):
    """Inputs are individually well formed but mutually inconsistent or degenerate."""
