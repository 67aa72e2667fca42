"""Exception taxonomy shared across the package.

CLI exit-code mapping: ConfigError (and subclasses) -> 2,
NumericError/ConvergenceError -> 3, ProviderError/SandboxError -> 4.
"""


class FasportError(Exception):
    """Base class for all package errors."""


class ConfigError(FasportError):
    """Invalid configuration, out-of-range argument, or malformed input file."""


class RefusalError(ConfigError):
    """A request whose cost exceeds a hard cap (e.g. exhaustive enumeration)."""


class NumericError(FasportError):
    """Numerical failure (eigensolver breakdown, singular system)."""


class ConvergenceError(NumericError):
    """Iteration cap reached before tolerance; carries the best-so-far solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ParseError(FasportError):
    """Provider response could not be parsed into a candidate."""


class ProviderError(FasportError):
    """LLM provider unreachable or persistently failing."""


class SandboxError(FasportError):
    """Sandbox worker could not be started or the protocol broke down."""
