"""Exception hierarchy shared by every mapfold module."""
from __future__ import annotations


class MapfoldError(Exception):
    """Base class for all errors raised by mapfold."""


class KernelSyntaxError(MapfoldError, SyntaxError):
    """Kernel text does not match the grammar."""

    def __init__(self, line: int, col: int, expected: str, found: str = "") -> None:
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class ValidationError(MapfoldError):
    """A parsed kernel breaks a well-formedness rule.

    ``rule`` is a stable identifier such as ``"SingleLoopRule"``.
    """

    def __init__(self, rule: str, detail: str = "", line: int | None = None) -> None:
        self.rule = rule
        self.detail = detail
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{rule}{where}: {detail}" if detail else f"{rule}{where}")


class KernelTypeError(MapfoldError, TypeError):
    """A builtin was applied to values with the wrong tags."""


class DivisionByZero(MapfoldError, ZeroDivisionError):
    """Kernel ``div`` with a zero divisor."""


class EmitAfterSnapshot(MapfoldError):
    """An emission reached a store that has already been snapshotted."""


class ConfigError(MapfoldError):
    """Invalid job or run configuration."""


class OracleMismatch(MapfoldError):
    """Engine output disagrees with the benchmark's reference answer."""
