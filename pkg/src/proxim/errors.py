"""Exception types raised across the package."""


class ProximError(Exception):
    """Base class for all package errors."""


class DimensionError(ProximError, ValueError):
    """Operands disagree on dimension or ambient norm."""


class DomainError(ProximError, ValueError):
    """An argument lies outside the domain of an operation."""


class CyclicityError(ProximError):
    """A map sent a point outside the opposite set."""


class ConfigError(ProximError, ValueError):
    """Missing or inconsistent configuration (gauge, beta, ...)."""


class NotFound(ProximError, KeyError):
    """Unknown gallery instance or input file."""


class SchemaError(ProximError, ValueError):
    """An instance document failed validation.

    ``line`` and ``column`` are 1-based when the offending location could be
    resolved in the source text.
    """

    def __init__(self, message, line=None, column=None, source=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.source = source

    def __str__(self):
        where = self.source or "<instance>"
        if self.line is not None:
            where = f"{where}:{self.line}:{self.column}"
        return f"{where}: {self.message}"
