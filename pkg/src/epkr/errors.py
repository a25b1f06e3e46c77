"""Exception hierarchy.

Each class carries the process exit code the command-line runner uses when
the error escapes a subcommand.
"""


class EpkrError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ConfigError(EpkrError, ValueError):
    """Invalid parameters, grids or option combinations."""

    exit_code = 1


class DataError(EpkrError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 2


class MissingFileError(DataError, FileNotFoundError):
    pass


class EmptyFileError(DataError):
    pass


class RaggedRowsError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class DimensionError(DataError):
    """Point or matrix dimensions do not agree."""


class NumericalError(EpkrError, ArithmeticError):
    """A numerical routine failed or produced an unacceptable result."""

    exit_code = 3


class ConvergenceError(NumericalError):
    pass


class CenterVerificationError(NumericalError):
    """No full-rank center set was found within the retry budget."""

    def __init__(self, message: str, achieved_rank: int, required_rank: int):
        super().__init__(message)
        self.achieved_rank = achieved_rank
        self.required_rank = required_rank
