"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class SingularMatrixError(InvalidInputError):
    """A matrix that must be positive definite is singular or near-singular."""


class ParseError(InvalidInputError):
    """A dataset file could not be parsed.

    Attributes:
        line: 1-based line number of the offending row, or None.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
