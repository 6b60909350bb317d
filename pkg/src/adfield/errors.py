"""Exception types shared across the package."""


class AdfError(Exception):
    """Base class for all package errors."""


class TooFewPointsError(AdfError, ValueError):
    pass


class NonFiniteInputError(AdfError, ValueError):
    pass


class EmptyIndexError(AdfError, ValueError):
    pass


class TooShortError(AdfError, ValueError):
    pass


class NonMonotoneTimeError(AdfError, ValueError):
    pass


class SnapshotFormatError(AdfError, ValueError):
    pass


class ParseError(AdfError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(AdfError, ValueError):
    pass
