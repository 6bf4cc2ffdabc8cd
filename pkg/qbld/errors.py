from __future__ import annotations

from typing import Optional


class QbldError(Exception):
    """Base error. `exit_code` is what the CLI returns for this failure class."""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# --- config / input validation (exit 2)
class ConfigError(QbldError):
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class SchemaError(ConfigError):
    """A column named in the schema is missing from the panel file."""


class PanelParseError(ConfigError):
    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


class EmptyIndividualError(ConfigError):
    pass


# --- IO (exit 3)
class FileAccessError(QbldError):
    exit_code = 3


# --- numerics (exit 4)
class NumericalError(QbldError):
    exit_code = 4

    def __init__(self, message: str, sweep: Optional[int] = None):
        super().__init__(f"sweep {sweep}: {message}" if sweep is not None else message)
        self.sweep = sweep


class InvariantViolation(NumericalError):
    def __init__(self, message: str, individual=None, period: Optional[int] = None):
        where = f" (individual {individual!r}, t={period})" if individual is not None else ""
        super().__init__(message + where)
        self.individual = individual
        self.period = period


# --- effects (exit 5)
class MissingAlphaError(QbldError):
    exit_code = 5


class DomainError(ValueError):
    """Distribution parameter outside its domain."""


class DegenerateChainError(ValueError):
    pass


class InsufficientLengthError(ValueError):
    pass
