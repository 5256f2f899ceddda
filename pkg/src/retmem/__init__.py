"""Triplet memory for language-model agents with an inline text memory-API."""

from retmem.errors import (
    BackendUnavailable,
    CallBudgetExceeded,
    DimensionMismatch,
    EmptyTerm,
    ExternalEmbedderUnavailable,
    InvalidQueryShape,
    MalformedCall,
    MalformedSnapshot,
    MemoryError_,
    MixedGroup,
    NoMatchingFact,
    PoolExhausted,
    ReservedDelimiter,
)
from retmem.memory import (
    ConflictPolicy,
    MemoryConfig,
    MemoryStore,
    QueryResult,
    Substitution,
    Triplet,
    TripletQuery,
    normalize_term,
)
from retmem.protocol import ApiCall, CallSpan, ReadCall, ReadResponse, WriteCall

__version__ = "0.1.0"

__all__ = [
    "ApiCall",
    "BackendUnavailable",
    "CallBudgetExceeded",
    "CallSpan",
    "ConflictPolicy",
    "DimensionMismatch",
    "EmptyTerm",
    "ExternalEmbedderUnavailable",
    "InvalidQueryShape",
    "MalformedCall",
    "MalformedSnapshot",
    "MemoryConfig",
    "MemoryError_",
    "MemoryStore",
    "MixedGroup",
    "NoMatchingFact",
    "PoolExhausted",
    "QueryResult",
    "ReadCall",
    "ReadResponse",
    "ReservedDelimiter",
    "Substitution",
    "Triplet",
    "TripletQuery",
    "WriteCall",
    "normalize_term",
]
