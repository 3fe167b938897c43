"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class TDSSError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TDSSError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, message, *shapes):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = shapes


class ConfigError(TDSSError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class DataError(TDSSError, ValueError):
    """Malformed or inconsistent graph data."""


class BundleFormatError(DataError):
    """A bundle file could not be parsed.

    Carries the offending file and 1-based line number when known.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


class NumericError(TDSSError, ArithmeticError):
    """A loss or gradient became non-finite."""
