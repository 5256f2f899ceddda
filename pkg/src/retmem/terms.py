"""Term normalization and the reserved-delimiter guard."""

from __future__ import annotations

import unicodedata

from retmem.errors import EmptyTerm, ReservedDelimiter

RESERVED = (">>", "{", "}", "[", "]")


def normalize_term(raw: str) -> str:
    """NFC, trim, collapse internal whitespace, case-fold.

    Stored triplets keep their surface form; every equality check goes through here.
    """
    text = unicodedata.normalize("NFC", raw)
    return " ".join(text.split()).casefold()


def check_term(term: str) -> str:
    """Raise if ``term`` cannot travel through the inline protocol; return it unchanged."""
    # a leading/trailing '>' would fuse with the '>>' separator and re-split differently
    if any(r in term for r in RESERVED) or term.startswith(">") or term.endswith(">"):
        raise ReservedDelimiter(term)
    if not normalize_term(term):
        raise EmptyTerm(term)
    return term
