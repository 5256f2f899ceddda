"""Synthetic fine-tuning corpus: people, their one relation to an organization, and
templated read/write instances with per-segment loss flags."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from retmem.errors import MixedGroup, NoMatchingFact, PoolExhausted
from retmem.mock import (
    RELATIONS,
    Question,
    QueryType,
    render_answer,
    render_question,
    render_statement,
)
from retmem.protocol import render_read_query, render_read_response, render_write
from retmem.terms import normalize_term

WRITE = "write"


def _pool(name: str) -> tuple[str, ...]:
    text = resources.files("retmem").joinpath("data", name).read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


FIRST_NAMES = _pool("first_names.txt")
LAST_NAMES = _pool("last_names.txt")
ORGANIZATIONS = _pool("organizations.txt")


class Tag(str, Enum):
    QUESTION = "Question"
    API_QUERY = "ApiQuery"
    API_RESPONSE = "ApiResponse"
    ANSWER = "Answer"
    STATEMENT = "Statement"
    API_WRITE = "ApiWrite"


LOSS_TAGS = frozenset({Tag.API_QUERY, Tag.ANSWER, Tag.API_WRITE})


@dataclass(frozen=True)
class Fact:
    per: str
    rel: str
    org: str

    def triple(self) -> tuple[str, str, str]:
        return (self.per, self.rel, self.org)


@dataclass(frozen=True)
class Segment:
    text: str
    tag: Tag
    loss: bool


@dataclass
class TrainingInstance:
    type: str  # a QueryType value, or "write"
    segments: list[Segment]
    facts: list[Fact]  # memory contents the instance assumes, in write order
    seed_path: str = ""

    @property
    def full_text(self) -> str:
        return "".join(s.text for s in self.segments)

    def segment(self, tag: Tag) -> str:
        return next(s.text for s in self.segments if s.tag == tag)

    def to_record(self) -> dict:
        return {
            "type": self.type,
            "segments": [{"text": s.text, "tag": s.tag.value, "loss": s.loss} for s in self.segments],
            "full_text": self.full_text,
            "seed_path": self.seed_path,
            "facts": [list(f.triple()) for f in self.facts],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrainingInstance":
        return cls(
            type=rec["type"],
            segments=[Segment(s["text"], Tag(s["tag"]), bool(s["loss"])) for s in rec["segments"]],
            facts=[Fact(*f) for f in rec.get("facts", [])],
            seed_path=rec.get("seed_path", ""),
        )


@dataclass
class CorpusSpec:
    seed: int = 0
    population: int = 500
    organizations: Sequence[str] = ORGANIZATIONS
    reads: int = 3000  # spread round-robin over the six question types
    writes: int = 1000
    group_sizes: tuple[int, int] = (2, 5)
    distractors: tuple[int, int] = (0, 3)
    shuffle: bool = False
    first_names: Sequence[str] = field(default=FIRST_NAMES, repr=False)
    last_names: Sequence[str] = field(default=LAST_NAMES, repr=False)

    def __post_init__(self):
        if min(self.population, self.reads, self.writes) < 0:
            raise ValueError("counts must be non-negative")
        lo, hi = self.group_sizes
        if not 1 <= lo <= hi:
            raise ValueError("group sizes must satisfy 1 <= min <= max")
        if not 0 <= self.distractors[0] <= self.distractors[1]:
            raise ValueError("distractor range must be non-negative and ordered")


def generate_facts(spec: CorpusSpec) -> list[Fact]:
    """One (relation, organization) per synthetic person, uniformly drawn; reproducible from the seed."""
    if not spec.first_names or not spec.last_names or not spec.organizations:
        raise PoolExhausted("name pools and organization list must be non-empty")
    n_last = len(spec.last_names)
    capacity = len(spec.first_names) * n_last
    if spec.population > capacity:
        raise PoolExhausted(f"population {spec.population} exceeds {capacity} distinct names")
    rng = random.Random(f"{spec.seed}:population")
    facts = []
    for code in rng.sample(range(capacity), spec.population):
        per = f"{spec.first_names[code // n_last]} {spec.last_names[code % n_last]}"
        facts.append(Fact(per, rng.choice(RELATIONS), rng.choice(spec.organizations)))
    return facts


def _agrees(fact: Fact, q: Question) -> bool:
    pairs = ((q.per, fact.per), (q.rel, fact.rel), (q.org, fact.org))
    return all(normalize_term(want) == normalize_term(have) for want, have in pairs if want is not None)


def question_for(qtype: QueryType, target: Fact) -> Question:
    bound = {slot: getattr(target, slot) for slot in qtype.slots}
    return Question(qtype, **bound)


def make_read_instance(
    qtype: QueryType | str, facts: Sequence[Fact], target: Fact, seed_path: str = ""
) -> TrainingInstance:
    """Instance asking ``qtype`` about the terms of ``target``, answered from ``facts``."""
    qtype = QueryType(qtype)
    q = question_for(qtype, target)
    matches = [f.triple() for f in facts if _agrees(f, q)]
    if not matches:
        raise NoMatchingFact(f"no fact matches {qtype.value} binding {q}")
    segments = [
        Segment(render_question(q), Tag.QUESTION, False),
        Segment(render_read_query(*q.read_slots()), Tag.API_QUERY, True),
        Segment(render_read_response(matches), Tag.API_RESPONSE, False),
        Segment(render_answer(qtype, matches), Tag.ANSWER, True),
    ]
    return TrainingInstance(qtype.value, segments, list(facts), seed_path)


def make_write_instance(group: Sequence[Fact], seed_path: str = "") -> TrainingInstance:
    if not group:
        raise MixedGroup("a write group needs at least one fact")
    rel, org = group[0].rel, group[0].org
    if any(f.rel != rel or f.org != org for f in group):
        raise MixedGroup("all facts in a write group must share relation and organization")
    persons = [f.per for f in group]
    segments = [
        Segment(render_statement(persons, rel, org), Tag.STATEMENT, False),
        Segment("".join(render_write(*f.triple()) for f in group), Tag.API_WRITE, True),
    ]
    return TrainingInstance(WRITE, segments, list(group), seed_path)


def _groups(facts: Iterable[Fact], key) -> list[list[Fact]]:
    out: dict = {}
    for f in facts:
        out.setdefault(key(f), []).append(f)
    return list(out.values())


_GROUP_KEYS = {
    QueryType.ORG: lambda f: f.org,
    QueryType.REL: lambda f: f.rel,
    QueryType.REL_ORG: lambda f: (f.rel, f.org),
}


def _prefer_multi(groups: list[list[Fact]]) -> list[list[Fact]]:
    # aggregation answers only matter with several people, so draw from groups of >= 2 when any exist
    multi = [g for g in groups if len(g) >= 2]
    return multi or groups


class CorpusBuilder:
    """Builds instances with per-instance derived seeds, so batches are independent."""

    def __init__(self, spec: CorpusSpec, facts: Optional[list[Fact]] = None):
        self.spec = spec
        self.facts = facts if facts is not None else generate_facts(spec)
        self._agg = {q: _prefer_multi(_groups(self.facts, key)) for q, key in _GROUP_KEYS.items()}
        self._pairs = _prefer_multi(_groups(self.facts, _GROUP_KEYS[QueryType.REL_ORG]))

    def _rng(self, kind: str, i: int) -> tuple[random.Random, str]:
        path = f"{self.spec.seed}/{kind}/{i}"
        return random.Random(path), path

    def read_instance(self, i: int) -> TrainingInstance:
        rng, path = self._rng("read", i)
        qtype = list(QueryType)[i % len(QueryType)]
        if qtype.aggregates:
            group = rng.choice(self._agg[qtype])
            k = min(len(group), rng.randint(*self.spec.group_sizes))
            anchors = rng.sample(group, k)
        else:
            anchors = [rng.choice(self.facts)]
        chosen = {f.per for f in anchors}
        pool = [f for f in self.facts if f.per not in chosen]
        n = min(len(pool), rng.randint(*self.spec.distractors))
        context = anchors + rng.sample(pool, n)
        rng.shuffle(context)
        return make_read_instance(qtype, context, anchors[0], path)

    def write_instance(self, i: int) -> TrainingInstance:
        rng, path = self._rng("write", i)
        group = rng.choice(self._pairs)
        k = min(len(group), rng.randint(*self.spec.group_sizes))
        return make_write_instance(rng.sample(group, k), path)

    def build(self) -> list[TrainingInstance]:
        if not self.facts:
            if self.spec.reads or self.spec.writes:
                raise NoMatchingFact("cannot build instances from an empty population")
            return []
        out = [self.read_instance(i) for i in range(self.spec.reads)]
        out += [self.write_instance(i) for i in range(self.spec.writes)]
        if self.spec.shuffle:
            random.Random(f"{self.spec.seed}/shuffle").shuffle(out)
        return out


def build_corpus(spec: CorpusSpec) -> list[TrainingInstance]:
    return CorpusBuilder(spec).build()


def emit_corpus(instances: Iterable[TrainingInstance], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


def load_corpus(path: str | Path) -> list[TrainingInstance]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingInstance.from_record(json.loads(line)) for line in fh if line.strip()]
