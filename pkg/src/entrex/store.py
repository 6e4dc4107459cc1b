"""Entity profiles: assembly from quads, on-disk store, corpus statistics.

Store directory layout (all UTF-8, byte-stable for identical input):

``profiles.dat``
    One record per entity, in lexicographic uri order. A record is a run of
    length-prefixed fields ``<byte-length>:<bytes>`` terminated by ``\\n``.
    Field order: uri, n_types, types..., n_titles, titles..., n_body,
    body..., n_props, (predicate, object)... Counts are fields too.
``profiles.idx``
    ``uri<TAB>byte-offset`` per line, sorted by uri.
``manifest.json``
    entity_count, type_histogram, title_predicates.
"""

from __future__ import annotations

import bisect
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .rdf import RDF_TYPE, Literal, Quad

log = logging.getLogger(__name__)

UNTYPED = "urn:entrex:untyped"

RDFS = "http://www.w3.org/2000/01/rdf-schema#"
DEFAULT_TITLE_PREDICATES = (
    RDFS + "label",
    "http://xmlns.com/foaf/0.1/name",
    "http://purl.org/dc/elements/1.1/title",
    "http://purl.org/dc/terms/title",
    "http://www.w3.org/2004/02/skos/core#prefLabel",
)

OWL_SAME_AS = "http://www.w3.org/2002/07/owl#sameAs"
SIMILARITY_PREDICATES = frozenset({
    OWL_SAME_AS,
    "http://www.w3.org/2004/02/skos/core#related",
    "http://dbpedia.org/property/wikiPageExternalLink",
    "http://dbpedia.org/property/wikiPageDisambiguates",
    "http://dbpedia.org/property/synonym",
})

PROFILES_FILE = "profiles.dat"
INDEX_FILE = "profiles.idx"
MANIFEST_FILE = "manifest.json"


class UnknownUri(KeyError):
    pass


@dataclass
class EntityProfile:
    uri: str
    types: frozenset = frozenset()
    title_literals: list = field(default_factory=list)
    body_literals: list = field(default_factory=list)
    object_properties: frozenset = frozenset()

    def effective_types(self) -> list:
        return sorted(self.types) if self.types else [UNTYPED]

    @property
    def primary_title(self) -> Optional[str]:
        return self.title_literals[0] if self.title_literals else None


@dataclass
class StoreManifest:
    entity_count: int
    type_histogram: dict
    title_predicates: list

    def to_json(self) -> str:
        return json.dumps({
            "entity_count": self.entity_count,
            "type_histogram": dict(sorted(self.type_histogram.items())),
            "title_predicates": sorted(self.title_predicates),
        }, indent=2, sort_keys=True) + "\n"


def _literal_key(lit: Literal) -> tuple:
    return (lit.lexical, lit.language or "", lit.datatype or "")


def build_profiles(quads: Iterable[Quad], title_predicates=DEFAULT_TITLE_PREDICATES) -> dict:
    """Group quads by subject into profiles (uri -> EntityProfile).

    Duplicate triples collapse, graphs are ignored. Literal lists are ordered
    by (predicate, lexical form, language, datatype) so the result does not
    depend on input order.
    """
    title_predicates = frozenset(title_predicates)
    if not title_predicates:
        raise ValueError("title_predicates must not be empty")
    types = defaultdict(set)
    literals = defaultdict(set)
    props = defaultdict(set)
    subjects = set()
    for q in quads:
        subjects.add(q.subject)
        if isinstance(q.object, Literal):
            literals[q.subject].add((q.predicate,) + _literal_key(q.object))
        elif q.predicate == RDF_TYPE:
            types[q.subject].add(q.object)
        else:
            props[q.subject].add((q.predicate, q.object))

    profiles = {}
    for uri in sorted(subjects):
        lits = sorted(literals.get(uri, ()))
        profiles[uri] = EntityProfile(
            uri=uri,
            types=frozenset(types.get(uri, ())),
            title_literals=[lex for pred, lex, _, _ in lits if pred in title_predicates],
            body_literals=[lex for _, lex, _, _ in lits],
            object_properties=frozenset(props.get(uri, ())),
        )
    return profiles


def make_manifest(profiles: dict, title_predicates) -> StoreManifest:
    hist = Counter()
    for p in profiles.values():
        for t in p.effective_types():
            hist[t] += 1
    return StoreManifest(len(profiles), dict(hist), sorted(title_predicates))


# --- record codec ---------------------------------------------------------

def _field(text: str) -> bytes:
    data = text.encode("utf-8")
    return str(len(data)).encode("ascii") + b":" + data


def encode_profile(p: EntityProfile) -> bytes:
    parts = [_field(p.uri)]
    for items in (sorted(p.types), p.title_literals, p.body_literals):
        parts.append(_field(str(len(items))))
        parts.extend(_field(x) for x in items)
    pairs = sorted(p.object_properties)
    parts.append(_field(str(len(pairs))))
    for pred, obj in pairs:
        parts.append(_field(pred))
        parts.append(_field(obj))
    return b"".join(parts) + b"\n"


def _read_field(buf: bytes, pos: int) -> tuple:
    colon = buf.index(b":", pos)
    size = int(buf[pos:colon])
    start = colon + 1
    return buf[start:start + size].decode("utf-8"), start + size


def decode_profile(buf: bytes, pos: int = 0) -> tuple:
    """Decode one record starting at ``pos``; returns (profile, next_pos)."""
    uri, pos = _read_field(buf, pos)
    lists = []
    for _ in range(3):
        n, pos = _read_field(buf, pos)
        items = []
        for _ in range(int(n)):
            x, pos = _read_field(buf, pos)
            items.append(x)
        lists.append(items)
    n, pos = _read_field(buf, pos)
    pairs = []
    for _ in range(int(n)):
        pred, pos = _read_field(buf, pos)
        obj, pos = _read_field(buf, pos)
        pairs.append((pred, obj))
    if buf[pos:pos + 1] != b"\n":
        raise ValueError(f"corrupt profile record for {uri!r}")
    profile = EntityProfile(uri, frozenset(lists[0]), lists[1], lists[2], frozenset(pairs))
    return profile, pos + 1


def write_store(profiles: dict, directory, title_predicates=DEFAULT_TITLE_PREDICATES) -> StoreManifest:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    offsets = []
    with open(directory / PROFILES_FILE, "wb") as fh:
        for uri in sorted(profiles):
            offsets.append((uri, fh.tell()))
            fh.write(encode_profile(profiles[uri]))
    with open(directory / INDEX_FILE, "w", encoding="utf-8", newline="\n") as fh:
        for uri, off in offsets:
            fh.write(f"{uri}\t{off}\n")
    manifest = make_manifest(profiles, title_predicates)
    (directory / MANIFEST_FILE).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def assemble(quads: Iterable[Quad], directory, title_predicates=DEFAULT_TITLE_PREDICATES) -> StoreManifest:
    profiles = build_profiles(quads, title_predicates)
    manifest = write_store(profiles, directory, title_predicates)
    log.info("stored %d entity profiles in %s", manifest.entity_count, directory)
    return manifest


class EntityStore:
    """Read-only view over a store directory.

    Lookups seek into ``profiles.dat`` through the offset index; decoded
    profiles are cached. Safe for concurrent readers once opened.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        for name in (PROFILES_FILE, INDEX_FILE, MANIFEST_FILE):
            if not (self.directory / name).exists():
                raise FileNotFoundError(self.directory / name)
        self.uris = []
        self._offsets = []
        with open(self.directory / INDEX_FILE, encoding="utf-8") as fh:
            for line in fh:
                uri, off = line.rstrip("\n").split("\t")
                self.uris.append(uri)
                self._offsets.append(int(off))
        with open(self.directory / PROFILES_FILE, "rb") as fh:
            self._data = fh.read()
        meta = json.loads((self.directory / MANIFEST_FILE).read_text(encoding="utf-8"))
        self.manifest = StoreManifest(meta["entity_count"], meta["type_histogram"], meta["title_predicates"])
        self._cache = {}
        self._by_type = None
        self._links = None

    def __len__(self):
        return len(self.uris)

    def __contains__(self, uri):
        i = bisect.bisect_left(self.uris, uri)
        return i < len(self.uris) and self.uris[i] == uri

    def get(self, uri: str) -> EntityProfile:
        cached = self._cache.get(uri)
        if cached is not None:
            return cached
        i = bisect.bisect_left(self.uris, uri)
        if i == len(self.uris) or self.uris[i] != uri:
            raise UnknownUri(uri)
        profile, _ = decode_profile(self._data, self._offsets[i])
        self._cache[uri] = profile
        return profile

    def __iter__(self) -> Iterator[EntityProfile]:
        for uri in self.uris:
            yield self.get(uri)

    def types(self) -> list:
        return sorted(self.manifest.type_histogram)

    def _type_map(self) -> dict:
        if self._by_type is None:
            by_type = defaultdict(list)
            for p in self:
                for t in p.effective_types():
                    by_type[t].append(p.uri)
            self._by_type = dict(by_type)
        return self._by_type

    def iterate_by_type(self, type_iri: str) -> Iterator[EntityProfile]:
        for uri in self._type_map().get(type_iri, ()):
            yield self.get(uri)

    def similarity_links(self) -> dict:
        """Undirected adjacency over explicit-similarity statements."""
        if self._links is None:
            links = defaultdict(set)
            for p in self:
                for pred, obj in p.object_properties:
                    if pred in SIMILARITY_PREDICATES and obj != p.uri:
                        links[p.uri].add(obj)
                        links[obj].add(p.uri)
            self._links = {k: sorted(v) for k, v in links.items()}
        return self._links


def corpus_stats(quads: Iterable[Quad]) -> list:
    """Per-graph (graph, explicit_similarity_statements, object_property_statements).

    Object properties exclude rdf:type, matching profile assembly. Triples are
    deduplicated within a graph; the default graph is reported as "".
    """
    seen = defaultdict(set)
    for q in quads:
        if isinstance(q.object, Literal) or q.predicate == RDF_TYPE:
            continue
        seen[q.graph or ""].add((q.subject, q.predicate, q.object))
    rows = []
    for graph in sorted(seen):
        triples = seen[graph]
        similar = sum(1 for _, p, _ in triples if p in SIMILARITY_PREDICATES)
        rows.append((graph, similar, len(triples)))
    return rows


def format_stats(rows) -> str:
    lines = ["graph\texplicit_similarity_statements\tobject_property_statements"]
    lines.extend(f"{g}\t{s}\t{n}" for g, s, n in rows)
    return "\n".join(lines) + "\n"

