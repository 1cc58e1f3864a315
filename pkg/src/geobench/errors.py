"""Exception hierarchy shared across the package.

ConfigError (and subclasses) map to CLI exit code 2; EngineAssertionError
signals a broken internal invariant and maps to exit code 3.
"""


class GeobenchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GeobenchError):
    """Invalid configuration or user input."""


class GenerationError(ConfigError):
    """The workload generator cannot satisfy the requested constraints."""


class FaultScheduleError(ConfigError):
    """Malformed fault schedule (e.g. recover without a preceding crash)."""


class RegistrationError(GeobenchError):
    """Protocol registry misuse (duplicate or conflicting registration)."""


class EngineAssertionError(GeobenchError):
    """An internal simulator invariant was violated; indicates a bug."""
