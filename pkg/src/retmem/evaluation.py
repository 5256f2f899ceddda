"""Closed-loop evaluation of a backend against a generated corpus, and the corpus consistency oracle."""

from __future__ import annotations

import random
import re
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from retmem.controller import END_OF_TURN, GenerationBackend, Session, SessionConfig
from retmem.dataset import LOSS_TAGS, WRITE, Tag, TrainingInstance
from retmem.errors import MalformedCall
from retmem.index import make_embedder
from retmem.memory import MemoryConfig, MemoryStore, TripletQuery
from retmem.mock import ACKNOWLEDGEMENT, MockBackend, QueryType, render_statement
from retmem.protocol import ReadCall, iter_calls, parse_call, parse_read_response
from retmem.terms import normalize_term

READ_TAGS = (Tag.QUESTION, Tag.API_QUERY, Tag.API_RESPONSE, Tag.ANSWER)
WRITE_TAGS = (Tag.STATEMENT, Tag.API_WRITE)
_SLOT_INDEX = {"per": 0, "rel": 1, "org": 2}


def memory_from_facts(instance: TrainingInstance, config: MemoryConfig | None = None) -> MemoryStore:
    mem = MemoryStore(config)
    for f in instance.facts:
        mem.write(*f.triple())
    return mem


def validate_instance(inst: TrainingInstance, config: MemoryConfig | None = None) -> list[str]:
    """Every way ``inst`` disagrees with the memory, the protocol, or the mock grammar."""
    problems = []
    tags = tuple(s.tag for s in inst.segments)
    expected = WRITE_TAGS if inst.type == WRITE else READ_TAGS
    if tags != expected:
        return [f"segment tags {[t.value for t in tags]} != {[t.value for t in expected]}"]
    for s in inst.segments:
        if s.loss != (s.tag in LOSS_TAGS):
            problems.append(f"loss flag on {s.tag.value} is {s.loss}")
    mock = MockBackend()
    if inst.type == WRITE:
        statement, writes = (s.text for s in inst.segments)
        calls = [span.call.terms for span in iter_calls(writes)]
        if calls != [f.triple() for f in inst.facts]:
            problems.append("ApiWrite calls do not match the facts")
        if mock.generate(statement) != writes + ACKNOWLEDGEMENT + END_OF_TURN:
            problems.append("mock replay of Statement differs from ApiWrite")
        return problems

    question, api_query, api_response, answer = (s.text for s in inst.segments)
    qtype = QueryType(inst.type)
    try:
        call = parse_call(api_query)
        response = parse_read_response(api_response)
    except MalformedCall as exc:
        return problems + [f"protocol: {exc}"]
    filled = tuple(i for i, q in enumerate(call.slots) if q)
    if not isinstance(call, ReadCall) or filled != tuple(_SLOT_INDEX[s] for s in qtype.slots):
        problems.append(f"ApiQuery shape {filled} does not fit {qtype.value}")
    result = memory_from_facts(inst, config).resolve(TripletQuery(*(q or None for q in call.slots)))
    if [t.terms for t in result.matches] != list(response.triplets):
        problems.append("memory resolution differs from ApiResponse")
    if mock.generate(question) != api_query:
        problems.append("mock replay differs from ApiQuery")
    if mock.generate(question + api_query + api_response) != answer + END_OF_TURN:
        problems.append("mock replay differs from Answer")
    return problems


def validate_corpus(instances: Iterable[TrainingInstance], config: MemoryConfig | None = None) -> dict:
    failures = {}
    n = 0
    for i, inst in enumerate(instances):
        n += 1
        problems = validate_instance(inst, config)
        if problems:
            failures[i] = problems
    return {"instances": n, "failed": len(failures), "failures": failures}


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def single_edit(word: str, rng: random.Random) -> str:
    """One random insertion, deletion, or substitution of a letter, guaranteed to change the normalized text."""
    while True:
        i = rng.randrange(len(word))
        op = rng.choice("ids")
        if op == "i":
            out = word[:i] + rng.choice(_LETTERS) + word[i:]
        elif op == "d" and len(word) > 1:
            out = word[:i] + word[i + 1 :]
        else:
            out = word[:i] + rng.choice(_LETTERS) + word[i + 1 :]
        if normalize_term(out) and normalize_term(out) != normalize_term(word):
            return out


def brute_force_nearest(query: str, vocabulary: Sequence[str], embed, threshold: float) -> Optional[str]:
    """Exhaustive cosine argmax over ``vocabulary``; first maximum wins."""
    if not vocabulary:
        return None
    e = embed(query)
    scores = np.array([float(embed(v) @ e) for v in vocabulary])
    best = int(np.argmax(scores))
    return vocabulary[best] if scores[best] >= threshold else None


@dataclass
class EvalReport:
    instances: int = 0
    correct: Counter = field(default_factory=Counter)
    total: Counter = field(default_factory=Counter)
    calls: int = 0
    well_formed: int = 0
    substitutions: int = 0
    typo_queries: int = 0
    typo_substitutions_ok: int = 0
    typo_oracle_ok: int = 0
    typo_oracle_agree: int = 0
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    def accuracy(self, key: str | None = None) -> float:
        if key is None:
            total = sum(self.total.values())
            return sum(self.correct.values()) / total if total else 1.0
        return self.correct[key] / self.total[key] if self.total[key] else 1.0

    @property
    def well_formed_rate(self) -> float:
        return self.well_formed / self.calls if self.calls else 1.0

    def to_dict(self) -> dict:
        out = {
            "instances": self.instances,
            "accuracy": round(self.accuracy(), 6),
            "accuracy_by_type": {k: round(self.accuracy(k), 6) for k in sorted(self.total)},
            "counts_by_type": dict(sorted(self.total.items())),
            "calls": self.calls,
            "well_formed_rate": round(self.well_formed_rate, 6),
            "substitutions": self.substitutions,
            "seconds": round(self.seconds, 3),
            "failures": self.failures[:20],
        }
        if self.typo_queries:
            out["typo"] = {
                "queries": self.typo_queries,
                "successful_substitutions": self.typo_substitutions_ok,
                "substitution_rate": round(self.typo_substitutions_ok / self.typo_queries, 6),
                "oracle_correct": self.typo_oracle_ok,
                "oracle_agreement": round(self.typo_oracle_agree / self.typo_queries, 6),
            }
        return out

    def table(self) -> str:
        rows = [("type", "n", "accuracy")]
        rows += [(k, str(self.total[k]), f"{self.accuracy(k):.4f}") for k in sorted(self.total)]
        rows.append(("all", str(sum(self.total.values())), f"{self.accuracy():.4f}"))
        width = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, width)) for r in rows]
        lines.append(f"well-formed calls: {self.well_formed}/{self.calls} ({self.well_formed_rate:.4f})")
        lines.append(f"substitutions: {self.substitutions}")
        if self.typo_queries:
            d = self.to_dict()["typo"]
            lines.append(
                f"typo queries: {self.typo_queries}, substitution rate {d['substitution_rate']:.4f}, "
                f"oracle agreement {d['oracle_agreement']:.4f}"
            )
        return "\n".join(lines)


def _count_calls(report: EvalReport, turns) -> None:
    for turn in turns:
        for e in turn.effects:
            report.calls += 1
            report.well_formed += e.call is not None
            report.substitutions += len(e.substitutions)


def evaluate(
    instances: Iterable[TrainingInstance],
    memory_config: MemoryConfig | None = None,
    backend_factory: Callable[[], GenerationBackend] = MockBackend,
    session_config: SessionConfig | None = None,
    typo_seed: Optional[int] = None,
) -> EvalReport:
    """Replay each instance's facts as statements into a fresh memory, then ask its question.

    With ``typo_seed`` set, the person name in per-bound questions gets one random edit.
    """
    memory_config = memory_config or MemoryConfig()
    embed = make_embedder(memory_config.embedder)
    report = EvalReport()
    start = time.perf_counter()
    for i, inst in enumerate(instances):
        report.instances += 1
        mem = MemoryStore(memory_config)
        session = Session(mem, backend_factory(), session_config)
        if inst.type == WRITE:
            turn = session.handle_input(inst.segment(Tag.STATEMENT))
            ok = [t.terms for t in mem.triplets()] == [f.triple() for f in inst.facts]
            ok = ok and turn.raw_trace.startswith(inst.segment(Tag.API_WRITE))
            _count_calls(report, [turn])
        else:
            for f in inst.facts:
                session.handle_input(render_statement([f.per], f.rel, f.org))
            question = inst.segment(Tag.QUESTION)
            qtype = QueryType(inst.type)
            typo_target = None
            if typo_seed is not None and "per" in qtype.slots:
                call = parse_call(inst.segment(Tag.API_QUERY))
                name = call.q1
                typo = single_edit(name, random.Random(f"{typo_seed}/{inst.seed_path or i}"))
                question = re.sub(re.escape(name), lambda _m: typo, question, count=1)
                typo_target = (name, typo)
            turn = session.handle_input(question)
            ok = turn.reply == inst.segment(Tag.ANSWER)
            _count_calls(report, session.transcript)
            if typo_target is not None:
                name, typo = typo_target
                report.typo_queries += 1
                subs = [s for e in turn.effects for s in e.substitutions if s.slot == 1]
                report.typo_substitutions_ok += any(s.substituted == normalize_term(name) for s in subs)
                vocab = sorted(mem.vocabulary(1))
                oracle = brute_force_nearest(typo, vocab, embed, memory_config.fuzzy_threshold)
                oracle_ok = oracle == normalize_term(name)
                report.typo_oracle_ok += oracle_ok
                report.typo_oracle_agree += oracle_ok == ok
        report.total[inst.type] += 1
        report.correct[inst.type] += ok
        if not ok:
            report.failures.append({"index": i, "type": inst.type, "seed_path": inst.seed_path})
    report.seconds = time.perf_counter() - start
    return report
