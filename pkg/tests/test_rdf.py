import gzip
import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrex.rdf import (BAD_ESCAPE, MALFORMED_IRI, MISSING_TERMINATOR, RDF_TYPE, UNTERMINATED_LITERAL,
                        IngestIOError, IngestReport, Literal, Quad, RdfSyntaxError, format_quad,
                        parse_line, stream_quads)

LABEL = "http://www.w3.org/2000/01/rdf-schema#label"


def test_type_triple():
    q = parse_line(f"<http://ex/e1> <{RDF_TYPE}> <http://ex/Person> .")
    assert q == Quad("http://ex/e1", RDF_TYPE, "http://ex/Person", None)


def test_language_literal():
    q = parse_line(f'<http://ex/e1> <{LABEL}> "Barack Obama"@EN .')
    assert q.object == Literal("Barack Obama", language="en")


def test_datatype_literal_and_graph():
    q = parse_line('<http://ex/e1> <http://ex/p> "5"^^<http://www.w3.org/2001/XMLSchema#int> <http://ex/g> .')
    assert q.object.datatype.endswith("#int")
    assert q.graph == "http://ex/g"


def test_literal_cannot_have_both():
    with pytest.raises(ValueError):
        Literal("x", language="en", datatype="http://ex/dt")


def test_escapes_decoded():
    q = parse_line(r'<http://ex/e> <http://ex/p> "a\"b\\c\nd\teé\U0001F600" .')
    assert q.object.lexical == 'a"b\\c\nd\teé\U0001F600'


@pytest.mark.parametrize("line", ["", "   ", "# comment", "\t# indented comment"])
def test_blank_lines(line):
    assert parse_line(line) is None


def test_blank_nodes():
    q = parse_line("_:b1 <http://ex/p> _:b2.")
    assert q.subject == "_:b1" and q.object == "_:b2"


@pytest.mark.parametrize("line,category", [
    ('<http://ex/e1> <http://ex/p> "x"', MISSING_TERMINATOR),
    ('<http://ex/e1> <http://ex/p> "x" . junk', MISSING_TERMINATOR),
    ('<http://ex/e1> <http://ex/p> "x .', UNTERMINATED_LITERAL),
    ('<http://ex/e1> <http://ex/p> "x\\q" .', BAD_ESCAPE),
    ('<http://ex/e1> <http://ex/p> "x\\u00g1" .', BAD_ESCAPE),
    ('<http://ex/e 1> <http://ex/p> "x" .', MALFORMED_IRI),
    ('<relative> <http://ex/p> "x" .', MALFORMED_IRI),
    ('<http://ex/e1 <http://ex/p> "x" .', MALFORMED_IRI),
    ('<http://ex/e1> _:p "x" .', MALFORMED_IRI),
])
def test_error_categories(line, category):
    with pytest.raises(RdfSyntaxError) as info:
        parse_line(line)
    assert info.value.category == category


def test_error_offset_is_in_bytes():
    # the bad escape sits after a two-byte character
    line = '<http://ex/e> <http://ex/p> "é\\q" .'
    with pytest.raises(RdfSyntaxError) as info:
        parse_line(line)
    assert info.value.offset == line.index("\\") + 1


def test_iri_whitespace_trimmed():
    q = parse_line("< http://ex/e > <http://ex/p> <http://ex/o> .")
    assert q.subject == "http://ex/e"


def test_stream_counts_tolerant(write_lines):
    path = write_lines([
        "# header",
        "<http://ex/a> <http://ex/p> <http://ex/b> .",
        "<http://ex/a> <http://ex/p> \"broken",
        "<http://ex/b> <http://ex/p> <http://ex/c> .",
    ])
    report = IngestReport()
    quads = list(stream_quads(path, report=report))
    assert len(quads) == 2
    assert report.lines_total == 4
    assert report.quads_ok == 2
    assert report.skipped_total == 1
    assert report.lines_skipped[UNTERMINATED_LITERAL] == 1


def test_stream_three_valid_one_comment(write_lines):
    path = write_lines(["<http://ex/a> <http://ex/p> <http://ex/b> ."] * 3 + ["# c"])
    report = IngestReport()
    assert len(list(stream_quads(path, report=report))) == 3
    assert report.skipped_total == 0


def test_stream_strict_aborts(write_lines):
    path = write_lines([
        "<http://ex/a> <http://ex/p> <http://ex/b> .",
        "<http://ex/a> <http://ex/p> <http://ex/b>",
        "<http://ex/b> <http://ex/p> <http://ex/c> .",
    ])
    got = []
    with pytest.raises(RdfSyntaxError) as info:
        for q in stream_quads(path, strict=True):
            got.append(q)
    assert len(got) == 1
    assert info.value.line_no == 2


def test_gzip_detected(tmp_path):
    p = tmp_path / "x.nq.gz"
    with gzip.open(p, "wb") as fh:
        fh.write(b"<http://ex/a> <http://ex/p> <http://ex/b> .\n")
    assert len(list(stream_quads(p))) == 1


def test_io_failure_is_distinct(tmp_path):
    with pytest.raises(IngestIOError):
        list(stream_quads(tmp_path / "missing.nq"))
    p = tmp_path / "trunc.gz"
    blob = gzip.compress(b"<http://ex/a> <http://ex/p> <http://ex/b> .\n" * 200)
    p.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(IngestIOError):
        list(stream_quads(p))


def test_bad_utf8_skipped():
    data = b"<http://ex/a> <http://ex/p> \"\xff\" .\n<http://ex/a> <http://ex/p> <http://ex/b> .\n"
    report = IngestReport()
    assert len(list(stream_quads(io.BytesIO(data), report=report))) == 1
    assert report.skipped_total == 1


iris = st.from_regex(r"http://ex\.org/[a-z0-9]{1,8}", fullmatch=True)
literals = st.builds(
    Literal,
    st.text(st.characters(blacklist_categories=("Cs",)), max_size=20),
    st.one_of(st.none(), st.sampled_from(["en", "de", "en-gb"])),
)


@settings(max_examples=200, deadline=None)
@given(iris, iris, st.one_of(iris, literals), st.one_of(st.none(), iris))
def test_round_trip(s, p, o, g):
    q = Quad(s, p, o, g)
    assert parse_line(format_quad(q)) == q


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_tolerant_never_raises(blob):
    report = IngestReport()
    try:
        for _ in stream_quads(io.BytesIO(blob), report=report):
            pass
    except IngestIOError:
        # only a corrupt gzip container may abort; plain bytes never do
        assert blob[:2] == b"\x1f\x8b"
        return
    assert report.quads_ok + report.skipped_total <= report.lines_total


def test_tolerant_equals_strict_on_valid(tmp_path):
    from entrex import synth
    corpus = synth.generate(synth.SynthSpec(num_types=1, clusters_per_type=2, entities_per_cluster=3))
    p = tmp_path / "c.nq"
    p.write_text("".join(format_quad(q) + "\n" for q in corpus.quads), encoding="utf-8")
    a = list(stream_quads(p))
    b = list(stream_quads(p, strict=True))
    assert a == b == corpus.quads
