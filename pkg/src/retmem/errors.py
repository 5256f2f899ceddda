"""Exception hierarchy shared by all retmem modules."""

from __future__ import annotations


class MemoryError_(Exception):
    """Base class for retmem errors (trailing underscore avoids the builtin)."""


class ReservedDelimiter(MemoryError_, ValueError):
    def __init__(self, term: str):
        super().__init__(f"term contains a reserved delimiter: {term!r}")
        self.term = term


class EmptyTerm(MemoryError_, ValueError):
    def __init__(self, term: str = ""):
        super().__init__(f"term is empty after normalization: {term!r}")
        self.term = term


class InvalidQueryShape(MemoryError_, ValueError):
    """A query must fill one or two of the three slots."""


class MalformedSnapshot(MemoryError_, ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"malformed snapshot record at line {line}: {reason}")
        self.line = line
        self.reason = reason


class DimensionMismatch(MemoryError_, ValueError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected dimension {expected}, got {got}")
        self.expected = expected
        self.got = got


class ExternalEmbedderUnavailable(MemoryError_, RuntimeError):
    pass


class MalformedCall(MemoryError_, ValueError):
    """A call closed with invalid structure.

    ``offset`` is where the call opens; ``end`` is where scanning may resume.
    """

    def __init__(self, offset: int, reason: str, end: int | None = None):
        super().__init__(f"malformed call at offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason
        self.end = offset if end is None else end


class BackendUnavailable(MemoryError_, RuntimeError):
    pass


class CallBudgetExceeded(MemoryError_, RuntimeError):
    """Raised when a turn exceeds its read or write budget; ``turn`` holds partial effects."""

    def __init__(self, message: str, turn=None):
        super().__init__(message)
        self.turn = turn


class PoolExhausted(MemoryError_, ValueError):
    pass


class NoMatchingFact(MemoryError_, LookupError):
    pass


class MixedGroup(MemoryError_, ValueError):
    pass
