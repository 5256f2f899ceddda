"""Term embeddings and a random-hyperplane LSH index partitioned by triplet column."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from retmem.errors import DimensionMismatch, EmptyTerm, ExternalEmbedderUnavailable
from retmem.terms import normalize_term

TRIGRAM = "trigram"
EXTERNAL = "external"


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = TRIGRAM
    dimension: int = 64
    seed: int = 0
    # only used by the external provider
    endpoint: Optional[str] = None
    timeout: float = 10.0
    token_env: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (TRIGRAM, EXTERNAL):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        # every trigram cancelled out; fall back to a fixed axis so the vector stays unit-norm
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / norm


def trigrams(normalized: str) -> list[str]:
    padded = f"^^{normalized}$"
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


class TrigramEmbedder:
    """Signed feature hashing of boundary-padded character trigrams.

    Uses keyed BLAKE2b, so output depends only on (term, dimension, seed).
    """

    def __init__(self, dimension: int = 64, seed: int = 0):
        self.dimension = dimension
        self.seed = seed
        self._key = int(seed).to_bytes(8, "little", signed=True)

    def __call__(self, term: str) -> np.ndarray:
        norm = normalize_term(term)
        if not norm:
            raise EmptyTerm(term)
        v = np.zeros(self.dimension, dtype=np.float64)
        for gram in trigrams(norm):
            h = int.from_bytes(
                hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=self._key).digest(),
                "little",
            )
            v[h % self.dimension] += 1.0 if (h >> 63) & 1 else -1.0
        return _unit(v)


class ExternalEmbedder:
    """Client for a remote embedding provider.

    Request body ``{"term": str, "dimension": int}``; response ``{"vector": [float, ...]}``.
    The returned vector is L2-normalized locally.
    """

    def __init__(self, endpoint: str, dimension: int, timeout: float = 10.0, token_env: str | None = None):
        self.endpoint = endpoint
        self.dimension = dimension
        self.timeout = timeout
        self.token_env = token_env

    def __call__(self, term: str) -> np.ndarray:
        import httpx

        norm = normalize_term(term)
        if not norm:
            raise EmptyTerm(term)
        headers = {}
        if self.token_env and os.environ.get(self.token_env):
            headers["Authorization"] = f"Bearer {os.environ[self.token_env]}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"term": norm, "dimension": self.dimension},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            values = resp.json()["vector"]
        except (httpx.HTTPError, KeyError, TypeError, ValueError) as exc:
            raise ExternalEmbedderUnavailable(str(exc)) from exc
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (self.dimension,):
            raise DimensionMismatch(self.dimension, int(v.size))
        return _unit(v)


def make_embedder(spec: EmbedderSpec):
    if spec.kind == TRIGRAM:
        return TrigramEmbedder(spec.dimension, spec.seed)
    if not spec.endpoint:
        raise ExternalEmbedderUnavailable("external embedder needs an endpoint")
    return ExternalEmbedder(spec.endpoint, spec.dimension, spec.timeout, spec.token_env)


def embed(term: str, spec: EmbedderSpec = EmbedderSpec()) -> np.ndarray:
    return make_embedder(spec)(term)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


class LshIndex:
    """Random-hyperplane LSH over unit vectors.

    ``n_tables`` tables of ``n_bits`` hyperplanes each. Buckets are keyed by
    (column, signature), so a lookup only ever sees terms from its own column.
    """

    def __init__(self, dimension: int = 64, n_tables: int = 16, n_bits: int = 8, seed: int = 0):
        if min(dimension, n_tables, n_bits) <= 0:
            raise ValueError("dimension, n_tables and n_bits must be positive")
        self.dimension = dimension
        self.n_tables = n_tables
        self.n_bits = n_bits
        self.seed = seed
        rng = np.random.default_rng(seed)
        planes = rng.standard_normal((n_tables, n_bits, dimension))
        self.hyperplanes = planes / np.linalg.norm(planes, axis=-1, keepdims=True)
        self._weights = 1 << np.arange(n_bits - 1, -1, -1, dtype=np.int64)
        self.tables: list[dict[tuple[int, int], list[int]]] = [{} for _ in range(n_tables)]
        # entry id -> (column, term, keys per table); ids grow with insertion order
        self._entries: dict[int, tuple[int, str, tuple[int, ...]]] = {}
        self._ids: dict[tuple[int, str], int] = {}
        self._vectors = np.zeros((64, dimension))
        self._size = 0
        self.last_candidates = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: tuple[int, str]) -> bool:
        return key in self._ids

    def _check(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e, dtype=np.float64)
        if e.shape != (self.dimension,):
            raise DimensionMismatch(self.dimension, int(e.size))
        return e

    def _keys(self, e: np.ndarray) -> tuple[int, ...]:
        bits = (self.hyperplanes @ e) >= 0.0
        return tuple(int(k) for k in bits.astype(np.int64) @ self._weights)

    def signature(self, e: np.ndarray, table: int) -> str:
        e = self._check(e)
        bits = (self.hyperplanes[table] @ e) >= 0.0
        return "".join("1" if b else "0" for b in bits)

    def insert(self, column: int, term: str, e: np.ndarray) -> None:
        e = self._check(e)
        if (column, term) in self._ids:
            return
        eid = self._size
        if eid == len(self._vectors):
            self._vectors = np.concatenate([self._vectors, np.zeros_like(self._vectors)])
        self._vectors[eid] = e
        self._size += 1
        keys = self._keys(e)
        for table, key in zip(self.tables, keys):
            table.setdefault((column, key), []).append(eid)
        self._entries[eid] = (column, term, keys)
        self._ids[(column, term)] = eid

    def remove(self, column: int, term: str) -> None:
        eid = self._ids.pop((column, term), None)
        if eid is None:
            return
        _, _, keys = self._entries.pop(eid)
        for table, key in zip(self.tables, keys):
            bucket = table[(column, key)]
            bucket.remove(eid)
            if not bucket:
                del table[(column, key)]

    def candidates(self, column: int, e: np.ndarray) -> list[int]:
        e = self._check(e)
        found: set[int] = set()
        for table, key in zip(self.tables, self._keys(e)):
            found.update(table.get((column, key), ()))
        return sorted(found)

    def nearest(self, column: int, e: np.ndarray, threshold: float = 0.7) -> Optional[tuple[str, float]]:
        """Best candidate by exact cosine, or None if nothing collides at or above ``threshold``."""
        e = self._check(e)
        ids = self.candidates(column, e)
        self.last_candidates = len(ids)
        if not ids:
            return None
        scores = self._vectors[ids] @ e
        best = int(np.argmax(scores))  # first max wins, ids are in insertion order
        score = float(min(1.0, scores[best]))
        if score < threshold:
            return None
        return self._entries[ids[best]][1], score

    def stats(self) -> dict:
        sizes = [len(b) for table in self.tables for b in table.values()]
        return {
            "entries": len(self._entries),
            "tables": self.n_tables,
            "bits": self.n_bits,
            "buckets": len(sizes),
            "max_bucket": max(sizes, default=0),
            "mean_bucket": float(np.mean(sizes)) if sizes else 0.0,
        }
