"""Exception types shared by the library and the command handlers."""
from typing import Any, Optional


class InvalidInputError(ValueError):
    """Input vector is malformed (non-finite entries, wrong dimension)."""


class InvalidParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class IndexOutOfRangeError(IndexError):
    """Sequence index outside the available data."""


class TooManyKinksError(RuntimeError):
    """Vertex enumeration of a hull would exceed the configured kink cap."""

    def __init__(self, kinks: int, cap: int):
        super().__init__(f"{kinks} kinked terms exceed the enumeration cap of {cap}")
        self.kinks = kinks
        self.cap = cap


class HullUnavailableError(RuntimeError):
    """The problem exposes no hull oracle."""


class DivergenceError(RuntimeError):
    """Iterates left the finite/bounded region.

    Attributes:
        last_state: the last state whose coordinates were all finite
        k: iteration at which divergence was detected
    """

    def __init__(self, message: str, last_state: Any = None, k: Optional[int] = None):
        super().__init__(message)
        self.last_state = last_state
        self.k = k


class ConfigError(ValueError):
    """Malformed experiment configuration; carries the offending line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
