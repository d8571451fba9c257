"""Exception hierarchy shared by all stanceseg modules."""


class StancesegError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(StancesegError, ValueError):
    pass


class CoverageError(InvalidInputError):
    """Spans do not form a total cover; ``position`` is the first bad token."""

    def __init__(self, message, position):
        super().__init__(f"{message} (position {position})")
        self.position = position


class InfeasibleError(StancesegError):
    """Every tag path is ruled out by the active constraints."""


class DimensionError(InvalidInputError):
    def __init__(self, message, expected=None, actual=None):
        if expected is not None or actual is not None:
            message = f"{message}: expected {expected}, got {actual}"
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class NonFiniteError(InvalidInputError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} at {position}"
        super().__init__(message)
        self.position = position


class ParseError(StancesegError, ValueError):
    """Malformed input text; ``position`` locates the problem when known."""

    def __init__(self, message, position=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.position = position
        self.line = line


class UndefinedMetricError(StancesegError, ValueError):
    pass


class TrainingError(StancesegError):
    pass


class ModelFormatError(StancesegError):
    pass
