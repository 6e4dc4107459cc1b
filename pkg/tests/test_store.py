import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrex.rdf import RDF_TYPE, Literal, Quad
from entrex.store import (OWL_SAME_AS, RDFS, UNTYPED, EntityStore, UnknownUri, assemble, build_profiles,
                          corpus_stats, format_stats)

EX = "http://ex/"
LABEL = RDFS + "label"


def obama_quads():
    return [
        Quad(EX + "e1", LABEL, Literal("Obama")),
        Quad(EX + "e1", RDF_TYPE, EX + "Person"),
        Quad(EX + "e1", EX + "spouse", EX + "e2"),
    ]


def test_profile_definition():
    p = build_profiles(obama_quads())[EX + "e1"]
    assert p.title_literals == ["Obama"]
    assert p.body_literals == ["Obama"]
    assert p.types == {EX + "Person"}
    assert p.object_properties == {(EX + "spouse", EX + "e2")}


def test_untyped_subject():
    p = build_profiles([Quad(EX + "a", EX + "p", EX + "b")])[EX + "a"]
    assert p.title_literals == [] and p.body_literals == []
    assert p.effective_types() == [UNTYPED]


def test_two_types():
    qs = [Quad(EX + "a", RDF_TYPE, EX + "T1"), Quad(EX + "a", RDF_TYPE, EX + "T2")]
    assert len(build_profiles(qs)[EX + "a"].types) == 2


def test_store_round_trip(tmp_path):
    quads = obama_quads() + [Quad(EX + "e0", RDF_TYPE, EX + "Person"), Quad(EX + "e3", RDF_TYPE, EX + "Person")]
    manifest = assemble(quads, tmp_path)
    store = EntityStore(tmp_path)
    assert manifest.entity_count == 3
    assert store.get(EX + "e1") == build_profiles(quads)[EX + "e1"]
    assert [p.uri for p in store.iterate_by_type(EX + "Person")] == [EX + "e0", EX + "e1", EX + "e3"]
    with pytest.raises(UnknownUri):
        store.get(EX + "nobody")
    assert EX + "e2" not in store


def test_store_bytes_stable(tmp_path):
    quads = obama_quads() + [Quad(EX + "e9", LABEL, Literal('tricky "quoted"\nline', language="en"))]
    assemble(quads, tmp_path / "a")
    shuffled = list(quads)
    random.Random(3).shuffle(shuffled)
    assemble(shuffled + quads, tmp_path / "b")  # permuted and duplicated
    for name in ("profiles.dat", "profiles.idx", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_similarity_links_undirected(tmp_path):
    assemble([Quad(EX + "a", OWL_SAME_AS, EX + "b"), Quad(EX + "b", RDF_TYPE, EX + "T")], tmp_path)
    links = EntityStore(tmp_path).similarity_links()
    assert links[EX + "a"] == [EX + "b"] and links[EX + "b"] == [EX + "a"]


def test_corpus_stats_counts():
    g = EX + "g"
    quads = [Quad(EX + f"s{i}", OWL_SAME_AS, EX + f"o{i}", g) for i in range(2)]
    quads += [Quad(EX + f"s{i}", EX + "knows", EX + f"o{i}", g) for i in range(5)]
    quads += [Quad(EX + "s0", LABEL, Literal("x"), g), Quad(EX + "s0", RDF_TYPE, EX + "T", g)]
    quads += [Quad(EX + "x", EX + "knows", EX + "y")]
    assert corpus_stats(quads) == [("", 0, 1), (g, 2, 7)]
    assert corpus_stats([]) == []
    assert format_stats([]).count("\n") == 1


terms = st.sampled_from([EX + c for c in "abcd"])
preds = st.sampled_from([LABEL, EX + "p", EX + "q", RDF_TYPE])
objs = st.one_of(terms, st.builds(Literal, st.sampled_from(["x", "y", "z z"])))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.builds(Quad, terms, preds, objs), max_size=30))
def test_triple_accounting(quads):
    quads = [q for q in quads if not (q.predicate == RDF_TYPE and isinstance(q.object, Literal))]
    profiles = build_profiles(quads)
    for uri, p in profiles.items():
        distinct = {q.triple for q in quads if q.subject == uri}
        assert len(p.object_properties) + len(p.body_literals) + len(p.types) == len(distinct)
        # titles are a sub-multiset of the body
        body = list(p.body_literals)
        for t in p.title_literals:
            body.remove(t)
    shuffled = list(quads)
    random.Random(0).shuffle(shuffled)
    assert build_profiles(shuffled) == profiles
