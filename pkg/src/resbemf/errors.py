"""Exception types shared across the package."""


class ColdStartError(LookupError):
    """A user or item is unknown to the model (no learned factors)."""


class ParseError(ValueError):
    """A rating file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingDivergedError(RuntimeError):
    """Training produced non-finite factor values."""
