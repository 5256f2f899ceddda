"""Rule-based generation backend implementing the synthetic person/organization grammar.

The same templates drive corpus generation (``retmem.dataset``), so a corpus
replayed through this backend reproduces its own API and answer segments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

from retmem.controller import END_OF_TURN, STOP_SEQUENCES
from retmem.protocol import (
    READ_OPEN,
    WRITE_OPEN,
    ReadResponse,
    render_read_query,
    render_write,
    scan,
)
from retmem.errors import MalformedCall

ACKNOWLEDGEMENT = "I will remember that."
UNRECOGNIZED = "I cannot process this input."
NO_INFORMATION = "I have no stored information about that."


@dataclass(frozen=True)
class RelationForms:
    relation: str
    phrase: str  # canonical surface phrase, e.g. "investor in"
    singular: str  # "an investor in"
    plural: str  # "investors in"
    noun: str  # "an investor"
    nouns: str  # "investors"


LEXICON: dict[str, RelationForms] = {
    f.relation: f
    for f in (
        RelationForms("employment", "employed by", "employed by", "employed by", "an employee", "employees"),
        RelationForms("manager", "manager of", "a manager of", "managers of", "a manager", "managers"),
        RelationForms("investor", "investor in", "an investor in", "investors in", "an investor", "investors"),
        RelationForms("founder", "founder of", "a founder of", "founders of", "a founder", "founders"),
        RelationForms("customer", "customer of", "a customer of", "customers of", "a customer", "customers"),
    )
}
RELATIONS = tuple(LEXICON)


def forms(relation: str) -> RelationForms:
    """Lexicon entry for ``relation``; unknown relations get a generic "<rel> of" rendering."""
    entry = LEXICON.get(relation.casefold())
    if entry is not None:
        return entry
    return RelationForms(relation, f"{relation} of", f"{relation} of", f"{relation} of", relation, relation)


class QueryType(str, Enum):
    PER = "per"
    PER_ORG = "per_org"
    PER_REL = "per_rel"
    ORG = "org"
    REL = "rel"
    REL_ORG = "rel_org"

    @property
    def slots(self) -> tuple[str, ...]:
        return _SLOTS[self]

    @property
    def aggregates(self) -> bool:
        return self in (QueryType.ORG, QueryType.REL, QueryType.REL_ORG)


_SLOTS = {
    QueryType.PER: ("per",),
    QueryType.PER_ORG: ("per", "org"),
    QueryType.PER_REL: ("per", "rel"),
    QueryType.ORG: ("org",),
    QueryType.REL: ("rel",),
    QueryType.REL_ORG: ("rel", "org"),
}


@dataclass(frozen=True)
class Statement:
    persons: tuple[str, ...]
    relation: str
    org: str


@dataclass(frozen=True)
class Question:
    qtype: QueryType
    per: Optional[str] = None
    rel: Optional[str] = None
    org: Optional[str] = None

    def read_slots(self) -> tuple[str, str, str]:
        return (self.per or "", self.rel or "", self.org or "")


class Unrecognized:
    def __repr__(self):
        return "Unrecognized()"

    def __eq__(self, other):
        return isinstance(other, Unrecognized)

    def __hash__(self):
        return 0


ParsedUtterance = Union[Statement, Question, Unrecognized]


def join_names(names: Sequence[str]) -> str:
    names = list(names)
    if len(names) <= 1:
        return "".join(names)
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + ", and " + names[-1]


def split_names(text: str) -> list[str]:
    return [n.strip() for n in re.split(r",\s*(?:and\s+)?|\s+and\s+", text) if n.strip()]


def _copula(n: int) -> str:
    return "is" if n == 1 else "are"


def render_statement(persons: Sequence[str], relation: str, org: str) -> str:
    f = forms(relation)
    phrase = f.singular if len(persons) == 1 else f.plural
    return f"{join_names(persons)} {_copula(len(persons))} {phrase} {org}."


def render_question(q: Question) -> str:
    f = forms(q.rel) if q.rel else None
    return {
        QueryType.PER: lambda: f"Who is {q.per}?",
        QueryType.PER_ORG: lambda: f"How {q.per} is related to {q.org}?",
        QueryType.PER_REL: lambda: f"{q.per} is {f.singular} which company?",
        QueryType.ORG: lambda: f"Who are related to {q.org}?",
        QueryType.REL: lambda: f"Who are the {f.nouns}?",
        QueryType.REL_ORG: lambda: f"Who are {f.plural} {q.org}?",
    }[q.qtype]()


def _unique(items: Iterable[str]) -> list[str]:
    seen, out = set(), []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def render_answer(qtype: QueryType, results: Iterable[Sequence[str]]) -> str:
    """Answer sentence for ``qtype`` from stored triplets (surface forms, seq order)."""
    rows = [tuple(r) for r in results]
    if not rows:
        return NO_INFORMATION
    if not qtype.aggregates:
        return " ".join(f"{per} is {forms(rel).singular} {org}." for per, rel, org in rows)
    names = _unique(r[0] for r in rows)
    head = f"{join_names(names)} {_copula(len(names))}"
    rel, org = rows[0][1], rows[0][2]
    one = len(names) == 1
    if qtype is QueryType.ORG:
        return f"{head} related to {org}."
    if qtype is QueryType.REL:
        return f"{head} {forms(rel).noun if one else forms(rel).nouns}."
    return f"{head} {forms(rel).singular if one else forms(rel).plural} {org}."


def _alternation(phrases: Iterable[str]) -> str:
    return "|".join(re.escape(p) for p in sorted(set(phrases), key=len, reverse=True))


_BY_SINGULAR = {f.singular.casefold(): f.relation for f in LEXICON.values()}
_BY_PLURAL = {f.plural.casefold(): f.relation for f in LEXICON.values()}
_BY_NOUNS = {f.nouns.casefold(): f.relation for f in LEXICON.values()}
_ANY_PHRASE = {**_BY_SINGULAR, **_BY_PLURAL}

_NAME = r"[^,?.!]+?"
_FLAGS = re.IGNORECASE
_PATTERNS = [
    (QueryType.PER_ORG, re.compile(rf"how (?P<per>{_NAME}) is related to (?P<org>{_NAME})\?", _FLAGS)),
    (QueryType.PER_REL, re.compile(rf"(?P<per>{_NAME}) is (?P<rel>{_alternation(_BY_SINGULAR)}) which company\?", _FLAGS)),
    (QueryType.ORG, re.compile(rf"who are related to (?P<org>{_NAME})\?", _FLAGS)),
    (QueryType.REL, re.compile(rf"who are the (?P<rel>{_alternation(_BY_NOUNS)})\?", _FLAGS)),
    (QueryType.REL_ORG, re.compile(rf"who are (?P<rel>{_alternation(_BY_PLURAL)}) (?P<org>{_NAME})\?", _FLAGS)),
    (QueryType.PER, re.compile(rf"who is (?P<per>{_NAME})\?", _FLAGS)),
]
_STATEMENT = re.compile(
    rf"(?P<names>[^?.!]+?) (?:is|are) (?P<rel>{_alternation(_ANY_PHRASE)}) (?P<org>[^?!]+?)\.", _FLAGS
)
_REL_TABLES = {
    QueryType.PER_REL: _BY_SINGULAR,
    QueryType.REL: _BY_NOUNS,
    QueryType.REL_ORG: _BY_PLURAL,
}


def parse_utterance(text: str) -> ParsedUtterance:
    text = " ".join(text.split())
    for qtype, pattern in _PATTERNS:
        m = pattern.fullmatch(text)
        if m:
            bound = m.groupdict()
            if "rel" in bound:
                bound["rel"] = _REL_TABLES[qtype][bound["rel"].casefold()]
            return Question(qtype, **bound)
    m = _STATEMENT.fullmatch(text)
    if m:
        persons = split_names(m["names"])
        if persons:
            return Statement(tuple(persons), _ANY_PHRASE[m["rel"].casefold()], m["org"].strip())
    return Unrecognized()


def _first_call(prefix: str) -> int:
    hits = [i for i in (prefix.find(WRITE_OPEN), prefix.find(READ_OPEN)) if i >= 0]
    return min(hits, default=-1)


class MockBackend:
    """Deterministic stand-in for the fine-tuned model; a pure function of the prefix."""

    def generate(self, prefix: str, stop: Sequence[str] = STOP_SEQUENCES) -> str:
        cut = _first_call(prefix)
        user = prefix if cut < 0 else prefix[:cut]
        parsed = parse_utterance(user)
        if cut < 0:
            if isinstance(parsed, Statement):
                calls = "".join(render_write(p, parsed.relation, parsed.org) for p in parsed.persons)
                return f"{calls}{ACKNOWLEDGEMENT}{END_OF_TURN}"
            if isinstance(parsed, Question):
                return render_read_query(*parsed.read_slots())
            return f"{UNRECOGNIZED}{END_OF_TURN}"
        if isinstance(parsed, Question):
            try:
                span = scan(prefix, cut)
            except MalformedCall:
                span = None
            if span is not None and span.response is not None:
                return render_answer(parsed.qtype, span.response) + END_OF_TURN
        return END_OF_TURN


def answer_from_response(qtype: QueryType, response: ReadResponse) -> str:
    return render_answer(qtype, response.triplets)
