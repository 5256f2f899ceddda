"""Turn loop between user, generation backend, and memory.

The backend only ever sees the user's text plus protocol text produced here.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

from retmem.errors import CallBudgetExceeded, MalformedCall
from retmem.memory import MemoryStore, Substitution, TripletQuery
from retmem.protocol import (
    READ_CLOSE,
    ApiCall,
    ReadCall,
    ReadResponse,
    WriteCall,
    render,
    render_read_response,
    scan,
    strip_protocol,
)

log = logging.getLogger(__name__)

END_OF_TURN = "<|end|>"
STOP_SEQUENCES = (READ_CLOSE, END_OF_TURN)


class GenerationBackend(Protocol):
    def generate(self, prefix: str, stop: Sequence[str] = STOP_SEQUENCES) -> str:
        """Next chunk of text. Ending the chunk with END_OF_TURN (or returning "") ends the turn."""
        ...


@dataclass
class Effect:
    call: Optional[ApiCall]
    ok: bool
    seq: Optional[int] = None
    response: Optional[ReadResponse] = None
    substitutions: list[Substitution] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def kind(self) -> str:
        if isinstance(self.call, WriteCall):
            return "write"
        if isinstance(self.call, ReadCall):
            return "read"
        return "malformed"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "ok": self.ok}
        if self.call is not None:
            out["call"] = render(self.call)
        if self.seq is not None:
            out["seq"] = self.seq
        if self.response is not None:
            out["response"] = [list(t) for t in self.response]
        if self.substitutions:
            out["substitutions"] = [
                {"slot": s.slot, "original": s.original, "substituted": s.substituted, "score": round(s.score, 6)}
                for s in self.substitutions
            ]
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class Turn:
    user_input: str
    raw_trace: str
    reply: str
    effects: list[Effect] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "input": self.user_input,
            "raw_trace": self.raw_trace,
            "effects": [e.to_dict() for e in self.effects],
            "reply": self.reply,
        }


@dataclass
class SessionConfig:
    max_steps: int = 16
    max_reads: int = 8
    max_writes: int = 64

    def __post_init__(self):
        if min(self.max_steps, self.max_reads, self.max_writes) <= 0:
            raise ValueError("budgets must be positive")


def clean_reply(raw_trace: str) -> str:
    return " ".join(strip_protocol(raw_trace).split())


class Session:
    def __init__(
        self,
        memory: MemoryStore,
        backend: GenerationBackend,
        config: SessionConfig | None = None,
        log_path: str | Path | None = None,
    ):
        self.memory = memory
        self.backend = backend
        self.config = config or SessionConfig()
        self.log_path = Path(log_path) if log_path else None
        self.transcript: list[Turn] = []

    def execute_call(self, call: ApiCall) -> Effect:
        try:
            if isinstance(call, WriteCall):
                return Effect(call, True, seq=self.memory.write(*call.terms))
            result = self.memory.resolve(TripletQuery(*(q or None for q in call.slots)))
        except ValueError as exc:
            return Effect(call, False, error=str(exc))
        response = ReadResponse(tuple(t.terms for t in result.matches))
        return Effect(call, True, response=response, substitutions=list(result.substitutions))

    def handle_input(self, user_text: str) -> Turn:
        cfg = self.config
        generated = ""
        pos = 0
        effects: list[Effect] = []
        reads = writes = 0

        def finish() -> Turn:
            turn = Turn(user_text, generated, clean_reply(generated), effects)
            self.transcript.append(turn)
            self._log(turn)
            return turn

        for _ in range(cfg.max_steps):
            chunk = self.backend.generate(user_text + generated, STOP_SEQUENCES)
            done = not chunk
            cut = chunk.find(END_OF_TURN)
            if cut >= 0:
                chunk, done = chunk[:cut], True
            generated += chunk

            while True:
                try:
                    span = scan(generated, pos)
                except MalformedCall as exc:
                    log.warning("skipping malformed call: %s", exc)
                    effects.append(Effect(None, False, error=str(exc)))
                    pos = max(exc.end, exc.offset + 1)
                    continue
                if span is None or not span.complete:
                    break
                if isinstance(span.call, WriteCall):
                    writes += 1
                    if writes > cfg.max_writes:
                        turn = finish()
                        raise CallBudgetExceeded(f"more than {cfg.max_writes} writes in one turn", turn)
                    effects.append(self.execute_call(span.call))
                    pos = span.end
                    continue
                reads += 1
                if reads > cfg.max_reads:
                    turn = finish()
                    raise CallBudgetExceeded(f"more than {cfg.max_reads} reads in one turn", turn)
                # pause: anything the backend wrote past the query is discarded
                generated = generated[: span.query_end]
                effect = self.execute_call(span.call)
                effects.append(effect)
                generated += render_read_response(effect.response or ReadResponse())
                pos = len(generated)
                done = False
                break
            if done:
                break
        return finish()

    def _log(self, turn: Turn) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(turn.to_dict(), ensure_ascii=False) + "\n")
