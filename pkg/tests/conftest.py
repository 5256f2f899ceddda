import os

import pytest
from hypothesis import settings, strategies as st

from retmem.memory import MemoryConfig, MemoryStore
from retmem.terms import check_term

settings.register_profile("ci", settings(max_examples=500, deadline=None))
settings.register_profile("dev", settings(max_examples=100, deadline=None))
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


def _valid(term: str) -> bool:
    try:
        check_term(term)
    except ValueError:
        return False
    return True


# anything the protocol can carry: no braces/brackets, no ">>", no edge '>'
terms = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="{}[]"),
    min_size=1,
    max_size=20,
).filter(_valid)

words = st.text(alphabet="abcdefghij", min_size=1, max_size=4)


@pytest.fixture
def memory():
    return MemoryStore()


@pytest.fixture
def supersede_memory():
    return MemoryStore(MemoryConfig(conflict_policy="supersede"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
