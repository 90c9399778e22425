"""Exception hierarchy shared by every stacktherm module."""

from __future__ import annotations


class StackThermError(Exception):
    """Base class for all stacktherm failures."""


class ConfigError(StackThermError, ValueError):
    """An input file or config value failed to parse or validate.

    ``source`` names the file (when known), ``line`` is 1-based, and
    ``field`` is a dotted locator such as ``layer.2.channel_width``.
    """

    def __init__(self, message: str, *, source: str | None = None,
                 line: int | None = None, field: str | None = None):
        self.message = message
        self.source = source
        self.line = line
        self.field = field
        super().__init__(str(self))

    def __str__(self) -> str:
        where = []
        if self.source:
            where.append(self.source)
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.field:
            where.append(self.field)
        if where:
            return f"{': '.join(where)}: {self.message}"
        return self.message


class SolverError(StackThermError):
    """A linear solve failed to meet its residual contract."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class IllPosedModelError(SolverError):
    """The model has no path for heat to leave the stack."""


class SweepError(StackThermError):
    """A sweep could not be enumerated or configured."""
