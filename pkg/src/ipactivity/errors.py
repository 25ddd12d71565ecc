"""Exception types shared across the toolkit."""


class DataError(Exception):
    """Raised when input data violates a documented contract."""


class IngestError(DataError):
    """Raised for record-level problems while reading an input file.

    Carries the 1-based line number when the offending line is known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
