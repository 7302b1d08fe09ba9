"""Exception hierarchy shared by the library and the command line front end.

Each class carries the exit status the CLI reports for it.
"""


class ClusteringError(Exception):
    exit_code = 2


class ConfigError(ClusteringError):
    """Invalid parameters or configuration values."""

    exit_code = 1


class DataError(ClusteringError, ValueError):
    """Input data violates a precondition (shape, missing values, duplicates)."""

    exit_code = 2


class ParseError(DataError):
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


class NumericalError(ClusteringError, ArithmeticError):
    """A numerical routine failed (non-convergence, degenerate kernel)."""

    exit_code = 3


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
