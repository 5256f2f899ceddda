import random

import pytest

from retmem.dataset import CorpusSpec, Segment, Tag, build_corpus
from retmem.evaluation import evaluate, single_edit, validate_corpus, validate_instance
from retmem.mock import QueryType
from retmem.remote import RemoteBackend, RemoteBackendConfig
from retmem.mock import MockBackend
from retmem.terms import normalize_term
from stub_server import StubServer


@pytest.fixture(scope="module")
def corpus():
    return build_corpus(CorpusSpec(seed=5, population=300, reads=120, writes=30))


def test_corpus_validates(corpus):
    assert validate_corpus(corpus)["failed"] == 0


def test_validation_catches_tampering(corpus):
    inst = next(i for i in corpus if i.type == "per")
    bad = type(inst)(inst.type, list(inst.segments), inst.facts, inst.seed_path)
    bad.segments[3] = Segment("Wrong answer.", Tag.ANSWER, True)
    assert any("Answer" in p for p in validate_instance(bad))
    bad.segments[0] = Segment(inst.segments[0].text, Tag.QUESTION, True)
    assert any("loss flag" in p for p in validate_instance(bad))


def test_mock_closed_loop_is_perfect(corpus):
    report = evaluate(corpus)
    assert report.accuracy() == 1.0
    assert report.well_formed_rate == 1.0
    assert set(report.total) == {q.value for q in QueryType} | {"write"}


def test_typo_accuracy_equals_substitution_rate(corpus):
    report = evaluate(corpus, typo_seed=3)
    per_bound = [q.value for q in QueryType if "per" in q.slots]
    correct = sum(report.correct[k] for k in per_bound)
    assert report.typo_queries == sum(report.total[k] for k in per_bound)
    assert correct == report.typo_substitutions_ok
    assert report.typo_oracle_agree / report.typo_queries >= 0.9


def test_single_edit_changes_text():
    rng = random.Random(0)
    for _ in range(200):
        out = single_edit("Vera Bayless", rng)
        assert normalize_term(out) != normalize_term("Vera Bayless")
        assert abs(len(out) - len("Vera Bayless")) <= 1


def test_remote_stub_metrics_equal_mock(corpus):
    subset = corpus[:24] + corpus[-6:]
    mock = MockBackend()
    expected = evaluate(subset).to_dict()
    with StubServer(lambda body: mock.generate(body["prefix"])) as stub:
        backend = RemoteBackend(RemoteBackendConfig(stub.url))
        got = evaluate(subset, backend_factory=lambda: backend).to_dict()
    expected.pop("seconds"), got.pop("seconds")
    assert got == expected
