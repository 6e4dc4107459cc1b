"""Streaming N-Triples / N-Quads reader.

The reader is line oriented and tolerant by default: malformed lines are
skipped and tallied in an :class:`IngestReport`, which is what you want for
noisy crawl data. Pass ``strict=True`` to abort on the first bad line.

Terms are kept as plain strings. IRIs are stored without angle brackets,
blank nodes keep their ``_:`` prefix, and literals become :class:`Literal`.
"""

from __future__ import annotations

import gzip
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Optional, Union

log = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

# error categories
MALFORMED_IRI = "MalformedIri"
UNTERMINATED_LITERAL = "UnterminatedLiteral"
MISSING_TERMINATOR = "MissingTerminator"
BAD_ESCAPE = "BadEscape"
MALFORMED_LITERAL = "MalformedLiteral"
BAD_ENCODING = "BadEncoding"

_IRI_FORBIDDEN = set('<>"{}|^`\\') | {chr(c) for c in range(0x20)}
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


@dataclass(frozen=True)
class Literal:
    lexical: str
    language: Optional[str] = None
    datatype: Optional[str] = None

    def __post_init__(self):
        if self.language is not None and self.datatype is not None:
            raise ValueError("a literal cannot carry both a language tag and a datatype")


Term = Union[str, Literal]


@dataclass(frozen=True)
class Quad:
    subject: str
    predicate: str
    object: Term
    graph: Optional[str] = None

    @property
    def triple(self) -> tuple:
        return (self.subject, self.predicate, self.object)


class RdfSyntaxError(ValueError):
    """A line that does not follow the N-Quads grammar."""

    def __init__(self, category: str, offset: int, message: str = "", line_no: Optional[int] = None):
        super().__init__(category, offset, message)
        self.category = category
        self.offset = offset
        self.message = message
        self.line_no = line_no

    def __str__(self):
        where = f"line {self.line_no}, " if self.line_no is not None else ""
        tail = f": {self.message}" if self.message else ""
        return f"{self.category} at {where}byte {self.offset}{tail}"


class IngestIOError(IOError):
    """The underlying byte stream failed while reading."""


@dataclass
class IngestReport:
    lines_total: int = 0
    quads_ok: int = 0
    lines_skipped: Counter = field(default_factory=Counter)

    @property
    def skipped_total(self) -> int:
        return sum(self.lines_skipped.values())

    def merge(self, other: "IngestReport") -> "IngestReport":
        return IngestReport(
            self.lines_total + other.lines_total,
            self.quads_ok + other.quads_ok,
            self.lines_skipped + other.lines_skipped,
        )

    def to_dict(self) -> dict:
        return {
            "lines_total": self.lines_total,
            "quads_ok": self.quads_ok,
            "lines_skipped": dict(sorted(self.lines_skipped.items())),
        }


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, category: str, message: str, pos: Optional[int] = None) -> RdfSyntaxError:
        pos = self.pos if pos is None else pos
        return RdfSyntaxError(category, len(self.text[:pos].encode("utf-8")), message)

    def skip_ws(self):
        text, n = self.text, len(self.text)
        while self.pos < n and text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def read_uchar(self, width: int, start: int) -> str:
        digits = self.text[self.pos:self.pos + width]
        if len(digits) != width or any(c not in "0123456789abcdefABCDEF" for c in digits):
            raise self.error(BAD_ESCAPE, f"expected {width} hex digits", start)
        self.pos += width
        code = int(digits, 16)
        if code > 0x10FFFF or 0xD800 <= code <= 0xDFFF:
            raise self.error(BAD_ESCAPE, "escape is not a valid code point", start)
        return chr(code)

    def read_iri(self) -> str:
        start = self.pos
        if self.peek() != "<":
            raise self.error(MALFORMED_IRI, "expected '<'")
        self.pos += 1
        out = []
        text, n = self.text, len(self.text)
        while True:
            if self.pos >= n:
                raise self.error(MALFORMED_IRI, "unterminated IRI", start)
            c = text[self.pos]
            if c == ">":
                self.pos += 1
                break
            if c == "\\":
                esc = self.pos
                self.pos += 1
                kind = self.peek()
                self.pos += 1
                if kind == "u":
                    out.append(self.read_uchar(4, esc))
                elif kind == "U":
                    out.append(self.read_uchar(8, esc))
                else:
                    raise self.error(BAD_ESCAPE, "only \\u and \\U escapes are allowed in IRIs", esc)
                continue
            if c in _IRI_FORBIDDEN:
                raise self.error(MALFORMED_IRI, f"character {c!r} not allowed in IRI")
            out.append(c)
            self.pos += 1
        iri = "".join(out).strip(" ")
        if " " in iri:
            raise self.error(MALFORMED_IRI, "whitespace inside IRI", start)
        if not iri or ":" not in iri:
            raise self.error(MALFORMED_IRI, "IRI must be absolute", start)
        return iri

    def read_bnode(self) -> str:
        start = self.pos
        self.pos += 2  # "_:"
        text, n = self.text, len(self.text)
        while self.pos < n and (text[self.pos].isalnum() or text[self.pos] in "_-.:"):
            self.pos += 1
        # a trailing '.' belongs to the statement terminator
        while self.pos > start + 2 and text[self.pos - 1] == ".":
            self.pos -= 1
        label = text[start + 2:self.pos]
        if not label:
            raise self.error(MALFORMED_IRI, "empty blank node label", start)
        return "_:" + label

    def read_node(self, allow_bnode: bool = True) -> str:
        if self.text.startswith("_:", self.pos):
            if not allow_bnode:
                raise self.error(MALFORMED_IRI, "blank node not allowed here")
            return self.read_bnode()
        return self.read_iri()

    def read_literal(self) -> Literal:
        start = self.pos
        self.pos += 1
        out = []
        text, n = self.text, len(self.text)
        while True:
            if self.pos >= n:
                raise self.error(UNTERMINATED_LITERAL, "missing closing quote", start)
            c = text[self.pos]
            if c == '"':
                self.pos += 1
                break
            if c == "\\":
                esc = self.pos
                self.pos += 1
                kind = self.peek()
                self.pos += 1
                if kind in _ECHAR:
                    out.append(_ECHAR[kind])
                elif kind == "u":
                    out.append(self.read_uchar(4, esc))
                elif kind == "U":
                    out.append(self.read_uchar(8, esc))
                else:
                    raise self.error(BAD_ESCAPE, f"unknown escape \\{kind}", esc)
                continue
            if c in "\n\r":
                raise self.error(UNTERMINATED_LITERAL, "raw line break inside literal", start)
            out.append(c)
            self.pos += 1
        lexical = "".join(out)
        if self.peek() == "@":
            tag_start = self.pos
            self.pos += 1
            while self.pos < n and (text[self.pos].isascii() and (text[self.pos].isalnum() or text[self.pos] == "-")):
                self.pos += 1
            tag = text[tag_start + 1:self.pos]
            parts = tag.split("-")
            if not tag or not parts[0].isalpha() or any(not p for p in parts):
                raise self.error(MALFORMED_LITERAL, "bad language tag", tag_start)
            return Literal(lexical, language=tag.lower())
        if text.startswith("^^", self.pos):
            self.pos += 2
            return Literal(lexical, datatype=self.read_iri())
        return Literal(lexical)


def parse_line(line: Union[str, bytes]) -> Optional[Quad]:
    """Parse one physical line.

    Returns a :class:`Quad`, or ``None`` for blank and comment lines.
    Raises :class:`RdfSyntaxError` for anything malformed.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RdfSyntaxError(BAD_ENCODING, exc.start, "invalid UTF-8") from None
    line = line.rstrip("\r\n")
    sc = _Scanner(line)
    sc.skip_ws()
    if sc.at_end() or sc.peek() == "#":
        return None

    subject = sc.read_node()
    sc.skip_ws()
    predicate = sc.read_node(allow_bnode=False)
    sc.skip_ws()
    if sc.peek() == '"':
        obj: Term = sc.read_literal()
    else:
        obj = sc.read_node()
    sc.skip_ws()
    graph = None
    if sc.peek() in ("<", "_"):
        graph = sc.read_node()
        sc.skip_ws()
    if sc.peek() != ".":
        raise sc.error(MISSING_TERMINATOR, "expected '.'")
    sc.pos += 1
    sc.skip_ws()
    if not sc.at_end() and sc.peek() != "#":
        raise sc.error(MISSING_TERMINATOR, "unexpected content after '.'")
    return Quad(subject, predicate, obj, graph)


def _open_stream(source) -> BinaryIO:
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        raw = open(source, "rb")
    else:
        raw = source
    if not hasattr(raw, "peek"):
        raw = io.BufferedReader(raw)
    if raw.peek(2)[:2] == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=raw)
    return raw


def stream_quads(source, strict: bool = False, report: Optional[IngestReport] = None) -> Iterator[Quad]:
    """Yield quads from a path or binary stream, in file order.

    ``report`` (if given) is updated in place as lines are consumed.
    Gzip input is detected from the magic bytes.
    """
    report = report if report is not None else IngestReport()
    try:
        stream = _open_stream(source)
    except OSError as exc:
        raise IngestIOError(str(exc)) from exc
    line_no = 0
    try:
        while True:
            try:
                raw = stream.readline()
            except (OSError, EOFError, gzip.BadGzipFile) as exc:
                raise IngestIOError(f"read failed after line {line_no}: {exc}") from exc
            if not raw:
                break
            line_no += 1
            report.lines_total += 1
            try:
                quad = parse_line(raw)
            except RdfSyntaxError as exc:
                exc.line_no = line_no
                if strict:
                    raise
                report.lines_skipped[exc.category] += 1
                continue
            if quad is None:
                continue
            report.quads_ok += 1
            yield quad
    finally:
        if stream is not source:
            stream.close()


def iter_quads(paths: Iterable, strict: bool = False, report: Optional[IngestReport] = None) -> Iterator[Quad]:
    for path in paths:
        yield from stream_quads(path, strict=strict, report=report)


def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r"))


def format_term(term: Term) -> str:
    if isinstance(term, Literal):
        out = f'"{_escape_literal(term.lexical)}"'
        if term.language:
            out += "@" + term.language
        elif term.datatype:
            out += f"^^<{term.datatype}>"
        return out
    if term.startswith("_:"):
        return term
    return f"<{term}>"


def format_quad(quad: Quad) -> str:
    """Canonical N-Quads line (without the trailing newline)."""
    parts = [format_term(quad.subject), format_term(quad.predicate), format_term(quad.object)]
    if quad.graph is not None:
        parts.append(format_term(quad.graph))
    return " ".join(parts) + " ."
