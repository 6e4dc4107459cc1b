import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrex.affinity import AffinityModel, EmptyTrainingSet, read_training_file, train
from entrex.rdf import RDF_TYPE, Literal, Quad
from entrex.store import RDFS, UNTYPED, EntityStore, assemble

PERSON, ORG, PLACE = "Person", "Org", "Place"


def person_judgments(n_person=8, n_org=2):
    return [("q1", PERSON, [PERSON])] * n_person + [("q1", PERSON, [ORG])] * n_org


def test_unsmoothed_ratio():
    m = train(person_judgments(), alpha=0.0)
    assert m.probability(PERSON, PERSON) == pytest.approx(0.8)


def test_smoothed_ratio():
    m = train(person_judgments(), alpha=1.0)
    assert m.probability(PERSON, PERSON) == pytest.approx(9 / 12)
    assert m.probability(ORG, PERSON) == pytest.approx(3 / 12)


def test_unseen_entity_type():
    m = train(person_judgments(), alpha=1.0)
    assert m.probability(PLACE, PERSON) == pytest.approx(1 / 12)
    wide = train(person_judgments(), alpha=1.0, entity_types=[PERSON, ORG, PLACE])
    assert wide.probability(PLACE, PERSON) == pytest.approx(1 / 13)


def _manual(rows_by_qtype, e_types):
    qs = sorted(rows_by_qtype)
    return AffinityModel(0.0, qs, e_types, [rows_by_qtype[q] for q in qs], [1.0] * len(qs))


def test_gamma_direct_substitution():
    m = _manual({"a": [0.8, 0.2], "b": [0.1, 0.9], "c": [0.2, 0.8]}, ["X", "Y"])
    assert m.gamma("X", "a") == pytest.approx(0.8 / 1.7)
    assert m.gamma("X", "a") == pytest.approx(0.470588, abs=1e-6)


def test_gamma_single_query_type_falls_back_to_p():
    m = train(person_judgments(), alpha=1.0)
    assert m.gamma(PERSON, PERSON) == pytest.approx(0.75)


@pytest.mark.parametrize("m_types", [2, 3, 5])
@pytest.mark.parametrize("p", [0.1, 0.4, 0.7])
def test_gamma_symmetry(m_types, p):
    rows = {f"q{i}": [p, 1 - p] for i in range(m_types)}
    m = _manual(rows, ["X", "Y"])
    assert m.gamma("X", "q0") == pytest.approx(p / ((m_types - 1) * (1 - p)))


def test_gamma_unknown_query_type_uniform():
    m = train(person_judgments(), alpha=1.0)
    assert m.gamma(PERSON, "Never") == pytest.approx(1 / 2)


def test_gamma_increasing_in_p():
    base = {"b": [0.3, 0.7], "c": [0.5, 0.5]}
    values = []
    for p in (0.1, 0.3, 0.5, 0.9):
        values.append(_manual({**base, "a": [p, 1 - p]}, ["X", "Y"]).gamma("X", "a"))
    assert values == sorted(values) and len(set(values)) == len(values)


def test_entity_gamma():
    m = train([("q1", PERSON, [PERSON]), ("q2", ORG, [ORG]), ("q3", ORG, [UNTYPED])], alpha=1.0)
    assert m.entity_gamma([PERSON], ORG) == m.gamma(PERSON, ORG)
    assert m.entity_gamma([PERSON, ORG], ORG) == max(m.gamma(PERSON, ORG), m.gamma(ORG, ORG))
    assert m.entity_gamma([], ORG) == m.gamma(UNTYPED, ORG)


def test_multi_typed_entity_counts_each_type_once():
    m = train([("q1", PERSON, [PERSON, ORG])], alpha=0.0)
    assert m.probability(PERSON, PERSON) == pytest.approx(0.5)
    assert m.probability(ORG, PERSON) == pytest.approx(0.5)


judgment = st.tuples(st.sampled_from(["q1", "q2"]), st.sampled_from("ABC"),
                     st.lists(st.sampled_from("XYZW"), min_size=1, max_size=3, unique=True))


@settings(max_examples=80, deadline=None)
@given(st.lists(judgment, min_size=1, max_size=30), st.floats(0.01, 3.0))
def test_rows_stochastic_and_positive(judgments, alpha):
    m = train(judgments, alpha)
    for row in m.rows:
        assert abs(sum(row) - 1.0) <= 1e-9
        assert all(v > 0 for v in row)
    back = AffinityModel.from_json(m.to_json())
    for tq in m.query_types:
        for te in m.entity_types:
            assert abs(back.gamma(te, tq) - m.gamma(te, tq)) <= 1e-12


def test_empty_training_set():
    with pytest.raises(EmptyTrainingSet):
        train([])
    with pytest.raises(ValueError):
        train(person_judgments(), alpha=-1)


def test_training_file(tmp_path):
    EX = "http://ex/"
    quads = [Quad(EX + "a", RDF_TYPE, EX + "P"), Quad(EX + "a", RDFS + "label", Literal("A")),
             Quad(EX + "b", RDFS + "label", Literal("B"))]
    assemble(quads, tmp_path / "store")
    store = EntityStore(tmp_path / "store")
    f = tmp_path / "train.tsv"
    f.write_text("# comment\nq1\tP\thttp://ex/a\t5\nq1\tP\thttp://ex/b\t3\n"
                 "q1\tP\thttp://ex/a\t2\nq2\tP\thttp://ex/missing\t5\n", encoding="utf-8")
    rows = read_training_file(f, store, min_grade=3)
    assert rows == [("q1", "P", [EX + "P"]), ("q1", "P", [UNTYPED])]
