"""Exceptions shared across modules (mapped to CLI exit codes in cli.py)."""


class NumericalError(ArithmeticError):
    """A numerical failure: singular innovation covariance, non-finite loss."""


class MotParseError(ValueError):
    """Malformed MOT-format line; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
