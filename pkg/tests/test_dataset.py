import json
from collections import Counter

import pytest

from retmem.controller import END_OF_TURN
from retmem.dataset import (
    LOSS_TAGS,
    CorpusSpec,
    Fact,
    Tag,
    build_corpus,
    emit_corpus,
    generate_facts,
    load_corpus,
    make_read_instance,
    make_write_instance,
)
from retmem.errors import MixedGroup, NoMatchingFact, PoolExhausted
from retmem.mock import ACKNOWLEDGEMENT, MockBackend, QueryType
from retmem.protocol import ReadCall, iter_calls, scan

DOMINICK = Fact("Dominick Alphonso", "employment", "BMW")
INVESTORS = [Fact(p, "investor", "Siemens") for p in ("Dirk Alosa", "Ty Baumkirchner", "Vera Bayless")]


def test_facts_reproducible():
    spec = CorpusSpec(seed=3, population=100)
    assert generate_facts(spec) == generate_facts(spec)
    assert generate_facts(spec) != generate_facts(CorpusSpec(seed=4, population=100))


def test_population_one_fact_per_person():
    facts = generate_facts(CorpusSpec(population=100))
    assert len(facts) == 100
    assert len({f.per for f in facts}) == 100


def test_pool_exhausted():
    with pytest.raises(PoolExhausted):
        generate_facts(CorpusSpec(population=10, first_names=["A", "B"], last_names=["C", "D"]))


def test_relation_histogram_uniform():
    facts = generate_facts(CorpusSpec(seed=1, population=100_000))
    counts = Counter(f.rel for f in facts)
    assert len(counts) == 5
    for n in counts.values():
        assert abs(n / len(facts) - 0.2) <= 0.05 * 0.2


def test_read_instance_worked_example():
    inst = make_read_instance(QueryType.PER, [DOMINICK], DOMINICK)
    assert [(s.tag, s.text, s.loss) for s in inst.segments] == [
        (Tag.QUESTION, "Who is Dominick Alphonso?", False),
        (Tag.API_QUERY, "[MEM_READ{Dominick Alphonso>>>>}:", True),
        (Tag.API_RESPONSE, "{Dominick Alphonso>>employment>>BMW}]", False),
        (Tag.ANSWER, "Dominick Alphonso is employed by BMW.", True),
    ]


def test_read_instance_lists_all_matches():
    two = INVESTORS[:2]
    inst = make_read_instance(QueryType.REL_ORG, two + [DOMINICK], two[0])
    assert inst.segment(Tag.API_RESPONSE) == "{Dirk Alosa>>investor>>Siemens};{Ty Baumkirchner>>investor>>Siemens}]"
    assert inst.segment(Tag.ANSWER) == "Dirk Alosa and Ty Baumkirchner are investors in Siemens."


def test_read_instance_no_match():
    with pytest.raises(NoMatchingFact):
        make_read_instance(QueryType.PER_ORG, [DOMINICK], Fact("Dominick Alphonso", "employment", "Siemens"))


def test_write_instance_group():
    inst = make_write_instance(INVESTORS)
    assert inst.segment(Tag.STATEMENT) == "Dirk Alosa, Ty Baumkirchner, and Vera Bayless are investors in Siemens."
    assert [s.call.terms for s in iter_calls(inst.segment(Tag.API_WRITE))] == [f.triple() for f in INVESTORS]
    assert [s.loss for s in inst.segments] == [False, True]


def test_write_instance_single():
    inst = make_write_instance([DOMINICK])
    assert inst.segment(Tag.STATEMENT) == "Dominick Alphonso is employed by BMW."
    assert inst.segment(Tag.API_WRITE) == "[MEM_WRITE{Dominick Alphonso>>employment>>BMW}]"


def test_write_instance_mixed_group():
    with pytest.raises(MixedGroup):
        make_write_instance([DOMINICK, INVESTORS[0]])


def test_write_replay_matches_api_write():
    for group in ([DOMINICK], INVESTORS):
        inst = make_write_instance(group)
        out = MockBackend().generate(inst.segment(Tag.STATEMENT))
        assert out == inst.segment(Tag.API_WRITE) + ACKNOWLEDGEMENT + END_OF_TURN


@pytest.fixture(scope="module")
def corpus():
    return build_corpus(CorpusSpec(seed=7, population=500, reads=600, writes=200))


def test_corpus_loss_mask_exact(corpus):
    for inst in corpus:
        for s in inst.segments:
            assert s.loss == (s.tag in LOSS_TAGS)


def test_corpus_type_mixture(corpus):
    counts = Counter(i.type for i in corpus)
    assert counts == {**{q.value: 100 for q in QueryType}, "write": 200}


def test_aggregation_instances_have_several_people(corpus):
    multi = [i for i in corpus if i.type != "write" and QueryType(i.type).aggregates]
    sizes = [i.segment(Tag.API_RESPONSE).count("};{") + 1 for i in multi]
    assert sum(s >= 2 for s in sizes) / len(sizes) > 0.9


def test_emit_and_reload(tmp_path, corpus):
    path = tmp_path / "c.jsonl"
    assert emit_corpus(corpus, path) == len(corpus)
    assert load_corpus(path) == corpus
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"type", "segments", "full_text", "seed_path", "facts"}
    assert rec["full_text"] == "".join(s["text"] for s in rec["segments"])


def test_read_full_text_rescans_to_one_read(corpus):
    for inst in corpus:
        if inst.type == "write":
            continue
        spans = list(iter_calls(inst.full_text))
        assert len(spans) == 1 and isinstance(spans[0].call, ReadCall)
        assert scan(inst.full_text, spans[0].end) is None


def test_corpus_bytes_reproducible(tmp_path):
    spec = CorpusSpec(seed=11, population=200, reads=60, writes=20, shuffle=True)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    emit_corpus(build_corpus(spec), a)
    emit_corpus(build_corpus(spec), b)
    assert a.read_bytes() == b.read_bytes()


def test_empty_corpus(tmp_path):
    path = tmp_path / "empty.jsonl"
    assert emit_corpus(build_corpus(CorpusSpec(reads=0, writes=0)), path) == 0
    assert load_corpus(path) == []
