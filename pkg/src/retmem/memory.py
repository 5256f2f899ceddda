"""Three-column triplet table with exact-then-fuzzy query resolution."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

from retmem.errors import InvalidQueryShape, MalformedSnapshot
from retmem.index import EmbedderSpec, LshIndex, make_embedder
from retmem.terms import check_term, normalize_term

COLUMNS = (1, 2, 3)


class ConflictPolicy(str, Enum):
    APPEND_ALL = "append_all"
    SUPERSEDE = "supersede"  # a new (t1, t2) pair replaces any older triplet with the same pair


@dataclass
class MemoryConfig:
    conflict_policy: ConflictPolicy = ConflictPolicy.APPEND_ALL
    fuzzy_threshold: float = 0.7
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    lsh_tables: int = 16
    lsh_bits: int = 8
    lsh_seed: int = 0

    def __post_init__(self):
        self.conflict_policy = ConflictPolicy(self.conflict_policy)
        if not 0.0 <= self.fuzzy_threshold <= 1.0:
            raise ValueError("fuzzy_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class Triplet:
    t1: str
    t2: str
    t3: str
    seq: int = -1

    @property
    def terms(self) -> tuple[str, str, str]:
        return (self.t1, self.t2, self.t3)

    def key(self) -> tuple[str, str, str]:
        return tuple(normalize_term(t) for t in self.terms)


@dataclass(frozen=True)
class TripletQuery:
    q1: Optional[str] = None
    q2: Optional[str] = None
    q3: Optional[str] = None

    def __post_init__(self):
        n = sum(q is not None for q in self.slots)
        if not 1 <= n <= 2:
            raise InvalidQueryShape(f"a query fills one or two slots, got {n}")

    @property
    def slots(self) -> tuple[Optional[str], Optional[str], Optional[str]]:
        return (self.q1, self.q2, self.q3)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(i for i, q in zip(COLUMNS, self.slots) if q is not None)


@dataclass(frozen=True)
class Substitution:
    slot: int
    original: str
    substituted: str
    score: float


@dataclass
class QueryResult:
    matches: list[Triplet]
    substitutions: list[Substitution] = field(default_factory=list)


class _RWLock:
    """Many readers or one writer."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class MemoryStore:
    """The triplet table, its per-column vocabularies, and the similarity index."""

    def __init__(self, config: MemoryConfig | None = None):
        self.config = config or MemoryConfig()
        self._embed = make_embedder(self.config.embedder)
        self._lock = _RWLock()
        self._reset()

    def _reset(self) -> None:
        self._rows: dict[int, Triplet] = {}
        self._keys: dict[tuple[str, str, str], int] = {}
        # column -> normalized term -> seqs holding it
        self._vocab: dict[int, dict[str, set[int]]] = {c: {} for c in COLUMNS}
        self.index = LshIndex(
            self.config.embedder.dimension,
            self.config.lsh_tables,
            self.config.lsh_bits,
            self.config.lsh_seed,
        )
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[Triplet]:
        with self._lock.read():
            return iter(sorted(self._rows.values(), key=lambda t: t.seq))

    def triplets(self) -> list[Triplet]:
        return list(self)

    def vocabulary(self, column: int) -> set[str]:
        with self._lock.read():
            return set(self._vocab[column])

    # -- writes ---------------------------------------------------------

    def write(self, t1: str, t2: str, t3: str) -> int:
        """Store a triplet and return its seq; an exact duplicate returns the existing seq."""
        for term in (t1, t2, t3):
            check_term(term)
        with self._lock.write():
            return self._insert(Triplet(t1, t2, t3), seq=None)

    def _insert(self, t: Triplet, seq: Optional[int]) -> int:
        key = t.key()
        if key in self._keys:
            return self._keys[key]
        if self.config.conflict_policy is ConflictPolicy.SUPERSEDE:
            stale = [s for s in self._vocab[1].get(key[0], ()) if self._rows[s].key()[1] == key[1]]
            for s in stale:
                self._remove(s)
        if seq is None:
            seq = self._next_seq
        self._next_seq = max(self._next_seq, seq + 1)
        row = Triplet(t.t1, t.t2, t.t3, seq)
        self._rows[seq] = row
        self._keys[key] = seq
        for column, norm in zip(COLUMNS, key):
            holders = self._vocab[column].setdefault(norm, set())
            if not holders:
                self.index.insert(column, norm, self._embed(norm))
            holders.add(seq)
        return seq

    def _remove(self, seq: int) -> None:
        row = self._rows.pop(seq)
        key = row.key()
        del self._keys[key]
        for column, norm in zip(COLUMNS, key):
            holders = self._vocab[column][norm]
            holders.discard(seq)
            if not holders:
                del self._vocab[column][norm]
                self.index.remove(column, norm)

    # -- reads ----------------------------------------------------------

    def resolve(self, query: TripletQuery) -> QueryResult:
        """Exact match per slot, falling back to the nearest stored term in the same column."""
        subs: list[Substitution] = []
        with self._lock.read():
            seqs: Optional[set[int]] = None
            for column, raw in zip(COLUMNS, query.slots):
                if raw is None:
                    continue
                norm = normalize_term(raw)
                holders = self._vocab[column].get(norm)
                if holders is None:
                    hit = self.index.nearest(column, self._embed(raw), self.config.fuzzy_threshold) if norm else None
                    if hit is None:
                        return QueryResult([], subs)
                    term, score = hit
                    subs.append(Substitution(column, raw, term, score))
                    holders = self._vocab[column][term]
                seqs = set(holders) if seqs is None else seqs & holders
            return QueryResult([self._rows[s] for s in sorted(seqs or ())], subs)

    def query(self, q1: str | None = None, q2: str | None = None, q3: str | None = None) -> QueryResult:
        return self.resolve(TripletQuery(q1, q2, q3))

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path) -> int:
        rows = self.triplets()
        with open(path, "w", encoding="utf-8") as fh:
            for t in rows:
                rec = {"seq": t.seq, "t1": t.t1, "t2": t.t2, "t3": t.t3}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return len(rows)

    def load(self, path: str | Path) -> int:
        """Replace the memory with the snapshot at ``path``; embeddings are recomputed."""
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedSnapshot(lineno, str(exc)) from exc
                if not isinstance(rec, dict):
                    raise MalformedSnapshot(lineno, "record is not an object")
                missing = [k for k in ("seq", "t1", "t2", "t3") if k not in rec]
                if missing:
                    raise MalformedSnapshot(lineno, f"missing field(s) {', '.join(missing)}")
                seq = rec["seq"]
                if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
                    raise MalformedSnapshot(lineno, "seq must be a non-negative integer")
                terms = (rec["t1"], rec["t2"], rec["t3"])
                if not all(isinstance(t, str) for t in terms):
                    raise MalformedSnapshot(lineno, "terms must be strings")
                try:
                    for t in terms:
                        check_term(t)
                except ValueError as exc:
                    raise MalformedSnapshot(lineno, str(exc)) from exc
                rows.append((lineno, Triplet(*terms, seq=seq)))
        with self._lock.write():
            self._reset()
            seen = set()
            for lineno, t in sorted(rows, key=lambda r: r[1].seq):
                if t.seq in seen:
                    raise MalformedSnapshot(lineno, f"duplicate seq {t.seq}")
                seen.add(t.seq)
                self._insert(t, seq=t.seq)
        return len(self._rows)

    def stats(self) -> dict:
        with self._lock.read():
            return {
                "triplets": len(self._rows),
                "vocabulary": {f"t{c}": len(self._vocab[c]) for c in COLUMNS},
                "lsh": self.index.stats(),
            }
