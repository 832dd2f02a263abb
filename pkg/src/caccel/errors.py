"""Exception hierarchy shared by all caccel modules."""


class CaccelError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CaccelError):
    """A text input (neighborhood, picture, automaton, schedule) is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
