import hashlib
import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from retmem.dataset import FIRST_NAMES, LAST_NAMES
from retmem.errors import DimensionMismatch, EmptyTerm
from retmem.evaluation import single_edit
from retmem.index import EmbedderSpec, LshIndex, TrigramEmbedder, cosine, embed, make_embedder


def reference_embedding(term, dimension=64, seed=0):
    """Independent re-derivation: dict accumulation, explicit padding, pure-python norm."""
    norm = " ".join(term.split()).casefold()
    padded = "^^" + norm + "$"
    acc = {}
    key = seed.to_bytes(8, "little", signed=True)
    for i in range(len(padded) - 2):
        digest = hashlib.blake2b(padded[i : i + 3].encode(), digest_size=8, key=key).digest()
        h = int.from_bytes(digest, "little")
        acc[h % dimension] = acc.get(h % dimension, 0.0) + (1.0 if h >> 63 else -1.0)
    length = math.sqrt(sum(v * v for v in acc.values()))
    return [acc.get(i, 0.0) / length for i in range(dimension)]


def random_unit(rng, d=64):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def person_names(n, seed=0):
    rng = random.Random(seed)
    names = set()
    while len(names) < n:
        names.add(f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}")
    return sorted(names)


@pytest.mark.parametrize("term", ["bmw", "Dominick Alphonso", "Ty Baumkirchner", "Ünïcode Ñame"])
def test_trigram_embedder_matches_reference(term):
    np.testing.assert_allclose(embed(term), reference_embedding(term), atol=1e-12)


def test_embed_deterministic():
    assert embed("bmw").tobytes() == embed("bmw").tobytes()
    assert TrigramEmbedder(64, 3)("bmw").tobytes() == TrigramEmbedder(64, 3)("bmw").tobytes()


@given(st.text(min_size=1, max_size=30).filter(lambda s: s.strip()))
def test_embedding_is_unit_norm(term):
    assert abs(np.linalg.norm(embed(term)) - 1.0) <= 1e-6


def test_embed_trailing_space_identical():
    assert cosine(embed("Dominick Alphonso"), embed("Dominick Alphonso ")) == pytest.approx(1.0)


def test_typo_closer_than_unrelated_name():
    ref = reference_embedding
    typo = float(np.dot(ref("Dominick Alphonso"), ref("Dominik Alphonso")))
    other = float(np.dot(ref("Dominick Alphonso"), ref("Vera Bayless")))
    assert typo > other
    assert cosine(embed("Dominick Alphonso"), embed("Dominik Alphonso")) == pytest.approx(typo)
    assert cosine(embed("Dominick Alphonso"), embed("Vera Bayless")) == pytest.approx(other)


def test_embed_empty_term():
    with pytest.raises(EmptyTerm):
        embed("   ")


def test_external_embedder_requires_endpoint():
    from retmem.errors import ExternalEmbedderUnavailable

    with pytest.raises(ExternalEmbedderUnavailable):
        make_embedder(EmbedderSpec(kind="external"))


def test_signature_shape_and_self_equality():
    idx = LshIndex()
    e = embed("bmw")
    assert idx.signature(e, 0) == idx.signature(e, 0)
    assert len(idx.signature(e, 3)) == idx.n_bits
    assert set(idx.signature(e, 3)) <= {"0", "1"}


def test_signature_of_negation_is_complement():
    rng = np.random.default_rng(1)
    idx = LshIndex()
    for _ in range(20):
        e = random_unit(rng)
        for table in range(idx.n_tables):
            flipped = "".join("1" if b == "0" else "0" for b in idx.signature(e, table))
            assert idx.signature(-e, table) == flipped


def test_signature_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        LshIndex(dimension=64).signature(np.ones(3) / math.sqrt(3), 0)


def test_same_seed_same_hyperplanes():
    a, b = LshIndex(seed=5), LshIndex(seed=5)
    assert np.array_equal(a.hyperplanes, b.hyperplanes)
    assert not np.array_equal(a.hyperplanes, LshIndex(seed=6).hyperplanes)


def test_bit_disagreement_tracks_angle():
    """Random-hyperplane collision property: P(bit differs) = angle / pi."""
    rng = np.random.default_rng(0)
    idx = LshIndex()
    pairs = []
    for _ in range(1000):
        e = random_unit(rng)
        p = e + rng.uniform(0.05, 2.0) * random_unit(rng)
        pairs.append((e, p / np.linalg.norm(p)))
    angles = np.array([math.acos(np.clip(np.dot(a, b), -1, 1)) / math.pi for a, b in pairs])
    for table in range(idx.n_tables):
        diffs = [
            sum(x != y for x, y in zip(idx.signature(a, table), idx.signature(b, table))) / idx.n_bits
            for a, b in pairs
        ]
        assert abs(np.mean(diffs) - angles.mean()) <= 0.1


def test_insert_then_nearest_self():
    idx = LshIndex()
    e = embed("bmw")
    idx.insert(3, "bmw", e)
    term, score = idx.nearest(3, e, 0.7)
    assert term == "bmw" and score == pytest.approx(1.0)


def test_insert_idempotent():
    idx = LshIndex()
    e = embed("bmw")
    idx.insert(3, "bmw", e)
    idx.insert(3, "bmw", e)
    assert len(idx) == 1
    for table in idx.tables:
        assert sum(len(b) for b in table.values()) == 1


def test_every_term_in_exactly_one_bucket_per_table():
    idx = LshIndex()
    for name in person_names(50):
        idx.insert(1, name, embed(name))
    for table in idx.tables:
        assert sum(len(b) for b in table.values()) == 50


def test_self_lookup_500_terms():
    idx = LshIndex()
    rng = random.Random(3)
    terms = sorted({"".join(rng.choice("abcdefghijklmnop") for _ in range(rng.randint(3, 12))) for _ in range(600)})[:500]
    for t in terms:
        idx.insert(1, t, embed(t))
    for t in terms:
        found, score = idx.nearest(1, embed(t), 0.7)
        assert score == pytest.approx(1.0)
        # a different term may only win on an exact embedding tie
        assert found == t or np.allclose(embed(found), embed(t))


def test_nearest_empty_index():
    assert LshIndex().nearest(1, embed("bmw"), 0.0) is None


def test_nearest_vocabulary_pair():
    idx = LshIndex()
    for t in ("bmw", "siemens"):
        idx.insert(3, t, embed(t))
    term, score = idx.nearest(3, embed("bmw"), 0.7)
    assert term == "bmw" and score == pytest.approx(1.0)


def test_column_isolation():
    idx = LshIndex()
    idx.insert(1, "siemens", embed("siemens"))
    idx.insert(2, "siemens", embed("siemens"))
    assert idx.nearest(3, embed("siemens"), 0.0) is None


def test_remove():
    idx = LshIndex()
    idx.insert(1, "bmw", embed("bmw"))
    idx.remove(1, "bmw")
    assert idx.nearest(1, embed("bmw"), 0.0) is None
    assert all(not t for t in idx.tables)


def test_tie_prefers_earliest_insertion():
    idx = LshIndex()
    e = embed("bmw")
    idx.insert(1, "first", e)
    idx.insert(1, "second", e)
    assert idx.nearest(1, e, 0.5)[0] == "first"


def brute_force(query_vec, names, matrix, threshold):
    scores = matrix @ query_vec
    best = int(np.argmax(scores))
    return (names[best], float(scores[best])) if scores[best] >= threshold else None


def test_recall_against_brute_force_and_oracle_bound():
    names = person_names(200)
    matrix = np.array([embed(n) for n in names])
    idx = LshIndex()
    for n, e in zip(names, matrix):
        idx.insert(1, n, e)
    rng = random.Random(11)
    agree = 0
    for _ in range(1000):
        q = embed(single_edit(rng.choice(names), rng))
        got = idx.nearest(1, q, 0.7)
        want = brute_force(q, names, matrix, 0.7)
        agree += (got and got[0]) == (want and want[0])
        if got is not None:
            assert got[1] >= 0.7
            assert got[1] <= float(np.max(matrix @ q)) + 1e-12
    assert agree / 1000 >= 0.9


def test_candidate_set_smaller_than_vocabulary():
    rng = random.Random(5)
    idx = LshIndex()
    vocab = {"".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(4, 14))) for _ in range(10_000)}
    for t in vocab:
        idx.insert(1, t, embed(t))
    sizes = []
    for _ in range(200):
        t = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(8))
        idx.nearest(1, embed(t), 0.7)
        sizes.append(idx.last_candidates)
    assert np.median(sizes) < len(vocab)
