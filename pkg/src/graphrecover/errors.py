"""Exception hierarchy shared by every module."""


class GraphRecoverError(Exception):
    """Base class for all package errors."""


class UsageError(GraphRecoverError, ValueError):
    """Invalid arguments or shapes (CLI exit code 2)."""


class ParseError(GraphRecoverError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GraphRecoverError, ValueError):
    """Input violates a structural invariant (self-loop, zero row, ...)."""


class FormatError(GraphRecoverError, ValueError):
    """Malformed embedding file."""


class NumericError(GraphRecoverError, ArithmeticError):
    """Non-finite values, divergence, or non-convergence."""
