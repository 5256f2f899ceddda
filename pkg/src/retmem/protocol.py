"""Parser and serializer for the inline memory-API.

Grammar::

    call     := write | read
    write    := "[MEM_WRITE{" term ">>" term ">>" term "}]"
    read     := "[MEM_READ{" slot ">>" slot ">>" slot "}:" response? "]"
    response := triple (";" triple)*
    triple   := "{" term ">>" term ">>" term "}"

Offsets are Python string indices. The model emits a read only through ``}:``;
the response and the closing ``]`` are spliced in by the controller.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, Union

from retmem.errors import InvalidQueryShape, MalformedCall
from retmem.terms import check_term

SEP = ">>"
WRITE_OPEN = "[MEM_WRITE{"
READ_OPEN = "[MEM_READ{"
WRITE_CLOSE = "}]"
READ_CLOSE = "}:"
_OPENERS = (WRITE_OPEN, READ_OPEN)
_BODY_STOP = re.compile(r"[\[\]{}]")
_RESPONSE = re.compile(r"(?:\{[^{}\[\]]*\}(?:;\{[^{}\[\]]*\})*)?\]")


@dataclass(frozen=True)
class WriteCall:
    t1: str
    t2: str
    t3: str

    def __post_init__(self):
        for t in (self.t1, self.t2, self.t3):
            check_term(t)

    @property
    def terms(self) -> tuple[str, str, str]:
        return (self.t1, self.t2, self.t3)


@dataclass(frozen=True)
class ReadCall:
    """Empty string marks an unfilled slot."""

    q1: str = ""
    q2: str = ""
    q3: str = ""

    def __post_init__(self):
        filled = [q for q in self.slots if q != ""]
        if not 1 <= len(filled) <= 2:
            raise InvalidQueryShape(f"a read fills one or two slots, got {len(filled)}")
        for q in filled:
            check_term(q)

    @property
    def slots(self) -> tuple[str, str, str]:
        return (self.q1, self.q2, self.q3)


ApiCall = Union[WriteCall, ReadCall]


@dataclass(frozen=True)
class ReadResponse:
    triplets: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "triplets", tuple(tuple(t) for t in self.triplets))
        for t in self.triplets:
            if len(t) != 3:
                raise ValueError(f"response triplet needs three fields: {t!r}")
            for term in t:
                check_term(term)

    def __len__(self) -> int:
        return len(self.triplets)

    def __iter__(self) -> Iterator[tuple[str, str, str]]:
        return iter(self.triplets)


@dataclass(frozen=True)
class CallSpan:
    start: int
    end: int
    call: Optional[ApiCall]
    complete: bool
    # reads only: where the query segment ends, and the spliced response if present
    query_end: Optional[int] = None
    response: Optional[ReadResponse] = field(default=None)


def render_write(t1: str, t2: str, t3: str) -> str:
    for t in (t1, t2, t3):
        check_term(t)
    return f"{WRITE_OPEN}{t1}{SEP}{t2}{SEP}{t3}{WRITE_CLOSE}"


def render_read_query(q1: str = "", q2: str = "", q3: str = "") -> str:
    ReadCall(q1 or "", q2 or "", q3 or "")
    return f"{READ_OPEN}{q1 or ''}{SEP}{q2 or ''}{SEP}{q3 or ''}{READ_CLOSE}"


def render_read_response(response: ReadResponse | Iterable[Sequence[str]]) -> str:
    if not isinstance(response, ReadResponse):
        response = ReadResponse(tuple(tuple(t) for t in response))
    return ";".join("{" + SEP.join(t) + "}" for t in response) + "]"


def render(call: ApiCall) -> str:
    if isinstance(call, WriteCall):
        return render_write(*call.terms)
    return render_read_query(*call.slots)


def _split(body: str, offset: int, end: int) -> list[str]:
    parts = body.split(SEP)
    if len(parts) != 3:
        raise MalformedCall(offset, f"expected 3 slots, found {len(parts)}", end)
    return parts


def _parse_response(text: str, pos: int) -> tuple[Optional[ReadResponse], int]:
    m = _RESPONSE.match(text, pos)
    if not m:
        return None, pos
    body = m.group(0)[:-1]
    triples = []
    if body:
        # terms cannot contain braces, so "};{" is an unambiguous separator
        for chunk in body[1:-1].split("};{"):
            parts = chunk.split(SEP)
            if len(parts) != 3:
                return None, pos
            triples.append(tuple(parts))
    try:
        return ReadResponse(tuple(triples)), m.end()
    except ValueError:
        return None, pos


def parse_read_response(text: str) -> ReadResponse:
    """Parse ``{a>>b>>c};{d>>e>>f}]`` (or a bare ``]``)."""
    response, end = _parse_response(text, 0)
    if response is None or end != len(text):
        raise MalformedCall(0, "not a read response", len(text))
    return response


def scan(text: str, start: int = 0) -> Optional[CallSpan]:
    """Find the earliest call at or after ``start``.

    Returns an incomplete span when the text ends inside a call (the caller
    should wait for more tokens), None when there is no call at all, and raises
    MalformedCall when a call closes with invalid structure. ``exc.end`` is
    where scanning can resume.
    """
    i = start
    while True:
        j = text.find("[", i)
        if j < 0:
            return None
        opener = next((o for o in _OPENERS if text.startswith(o, j)), None)
        if opener is None:
            tail = text[j:]
            if any(o.startswith(tail) for o in _OPENERS):
                return CallSpan(j, len(text), None, False)
            i = j + 1
            continue
        body_start = j + len(opener)
        stop = _BODY_STOP.search(text, body_start)
        if stop is None:
            return CallSpan(j, len(text), None, False)
        k = stop.start()
        if text[k] != "}":
            raise MalformedCall(j, f"unexpected {text[k]!r} inside call", k)
        if k + 1 == len(text):
            return CallSpan(j, len(text), None, False)
        close = WRITE_CLOSE if opener == WRITE_OPEN else READ_CLOSE
        if text[k + 1] != close[1]:
            raise MalformedCall(j, f"call body must close with {close!r}", k + 1)
        end = k + 2
        parts = _split(text[body_start:k], j, end)
        try:
            if opener == WRITE_OPEN:
                return CallSpan(j, end, WriteCall(*parts), True)
            call = ReadCall(*parts)
        except ValueError as exc:
            raise MalformedCall(j, str(exc), end) from exc
        response, resp_end = _parse_response(text, end)
        return CallSpan(j, resp_end, call, True, query_end=end, response=response)


def parse_call(text: str) -> ApiCall:
    """Parse exactly one call; a read may carry its spliced response."""
    span = scan(text)
    if span is None or span.start != 0:
        raise MalformedCall(0, "text does not start with a call", len(text))
    if not span.complete:
        raise MalformedCall(0, "call is incomplete", len(text))
    if span.end != len(text):
        raise MalformedCall(0, "trailing text after call", len(text))
    return span.call


def iter_calls(text: str, start: int = 0) -> Iterator[CallSpan]:
    """Complete calls in order; malformed regions are skipped, a trailing incomplete call ends iteration."""
    pos = start
    while True:
        try:
            span = scan(text, pos)
        except MalformedCall as exc:
            pos = max(exc.end, exc.offset + 1)
            continue
        if span is None or not span.complete:
            return
        yield span
        pos = span.end


def strip_protocol(raw: str) -> str:
    """Remove every call region (complete, malformed, or unterminated) and trim."""
    pieces: list[str] = []
    pos = cursor = 0
    while True:
        try:
            span = scan(raw, pos)
        except MalformedCall as exc:
            cut_from, cut_to = exc.offset, max(exc.end, exc.offset + 1)
        else:
            if span is None:
                break
            if not span.complete and not raw.startswith(_OPENERS, span.start):
                break  # a stray '[' at the very end is ordinary text
            cut_from, cut_to = span.start, span.end
        pieces.append(raw[cursor:cut_from])
        cursor = pos = cut_to
    pieces.append(raw[cursor:])
    out = pieces[0]
    for piece in pieces[1:]:
        if out[-1:].isspace() or not out:
            piece = piece.lstrip()
        out += piece
    return out.strip()
