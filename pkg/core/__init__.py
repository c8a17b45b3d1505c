"""Core numerical pieces: set-valued selections, test problems and stepsize schedules."""
from .errors import (
    ConfigError,
    DivergenceError,
    HullUnavailableError,
    IndexOutOfRangeError,
    InvalidInputError,
    InvalidParameterError,
    TooManyKinksError,
)
from .fields import PhiChoice, TiePolicy
from .problems import FiniteSumProblem, HullDescription, Zonotope
from .schedules import StepsizeSchedule, ValidationReport

__all__ = [
    "ConfigError",
    "DivergenceError",
    "HullUnavailableError",
    "IndexOutOfRangeError",
    "InvalidInputError",
    "InvalidParameterError",
    "TooManyKinksError",
    "PhiChoice",
    "TiePolicy",
    "FiniteSumProblem",
    "HullDescription",
    "Zonotope",
    "StepsizeSchedule",
    "ValidationReport",
]
