"""Exception types shared across the package."""


class MultispreadError(Exception):
    """Base class for every error raised by this package."""


class ParseError(MultispreadError, ValueError):
    """Malformed input file. Carries the 1-based line number and/or byte offset."""

    def __init__(self, message, *, path=None, line=None, offset=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")
        self.path = path
        self.line = line
        self.offset = offset


class ValidationError(MultispreadError, ValueError):
    pass


class CompileError(MultispreadError, ValueError):
    pass


class DomainError(MultispreadError, ValueError):
    pass


class ConfigError(MultispreadError, ValueError):
    pass


class AggregationError(MultispreadError, ValueError):
    pass


class QueueContractError(MultispreadError, RuntimeError):
    """Misuse of the event queue (duplicate key, missing key, bad time)."""


class EmptyQueueError(MultispreadError, IndexError):
    pass


class ConsistencyError(MultispreadError, RuntimeError):
    """Incrementally maintained simulation state disagrees with a recomputation."""
