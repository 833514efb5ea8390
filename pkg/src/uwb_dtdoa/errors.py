"""Exception types shared across the package."""

from __future__ import annotations


class DtdoaError(Exception):
    """Base class; ``code`` is the machine-readable tag printed by the CLI."""

    code = "ERROR"

    def __init__(self, message: str = "", code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ZeroIntervalError(DtdoaError, ZeroDivisionError):
    code = "ZERO_INTERVAL"


class ScheduleOverlapError(DtdoaError, ValueError):
    code = "SCHEDULE_OVERLAP"


class DegenerateError(DtdoaError, ArithmeticError):
    code = "DEGENERATE"


class NoConvergenceError(DtdoaError, RuntimeError):
    code = "NO_CONVERGENCE"


class DegenerateDrawError(DtdoaError, RuntimeError):
    code = "DEGENERATE_DRAW"


class NegativeVarianceWarning(UserWarning):
    """A closed-form variance evaluated below zero."""


class ConfigError(DtdoaError, ValueError):
    code = "CONFIG_INVALID"


class ConfigNotFoundError(ConfigError):
    code = "CONFIG_NOT_FOUND"
