"""Exception types shared across the package."""


class SclTpeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SclTpeError, ValueError):
    """Array shapes do not conform."""


class DegenerateRowError(SclTpeError, ValueError):
    """A row has (near) zero norm and cannot be normalized."""


class NumericalError(SclTpeError, ArithmeticError):
    """A non-finite value appeared in a loss, gradient or parameter."""


class ParseError(SclTpeError, ValueError):
    """Malformed dataset file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class EmptyDatasetError(SclTpeError, ValueError):
    """A dataset (or evaluation set) contains no samples."""


class ConfigError(SclTpeError, ValueError):
    """Invalid experiment or component configuration."""
