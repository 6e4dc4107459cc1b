"""Entity feature vectors: tf-idf unigrams/bigrams plus binary structural features.

Feature ids are strings with a namespace prefix: ``U:term``, ``B:term1 term2``
and ``S:predicate|object``. Vectors are plain ``dict`` objects mapping id to a
positive weight.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .text_index import tokenize

UNIGRAM, BIGRAM, STRUCTURAL = "U", "B", "S"


def feature_id(namespace: str, key: str) -> str:
    if namespace not in (UNIGRAM, BIGRAM, STRUCTURAL) or not key:
        raise ValueError(f"bad feature id {namespace}:{key!r}")
    return f"{namespace}:{key}"


@dataclass
class FeatureVector:
    uri: str
    entries: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.entries

    def keys(self):
        return self.entries.keys()


def lexical_counts(profile) -> Counter:
    counts = Counter()
    for literal in profile.body_literals:
        tokens = tokenize(literal)
        counts.update(feature_id(UNIGRAM, t) for t in tokens)
        counts.update(feature_id(BIGRAM, f"{a} {b}") for a, b in zip(tokens, tokens[1:]))
    return counts


def build_vectors(profiles) -> list:
    """tf-idf vectors for entities sharing one type.

    idf is ``ln(N_T / df_T)`` over this entity set, so a term present in every
    entity gets weight 0 and is dropped. Structural features weigh 1.0.
    """
    profiles = sorted(profiles, key=lambda p: p.uri)
    n = len(profiles)
    counts = [lexical_counts(p) for p in profiles]
    df = Counter()
    for c in counts:
        df.update(c.keys())
    vectors = []
    for p, c in zip(profiles, counts):
        entries = {}
        for fid, tf in c.items():
            w = tf * math.log(n / df[fid])
            if w > 0:
                entries[fid] = w
        for pred, obj in p.object_properties:
            entries[feature_id(STRUCTURAL, f"{pred}|{obj}")] = 1.0
        vectors.append(FeatureVector(p.uri, entries))
    return vectors


def prune(vectors, min_entity_freq: int = 2, max_df_fraction=0.5) -> list:
    """Drop features seen in fewer than ``min_entity_freq`` entities or in
    more than ``max_df_fraction`` of them (``None`` disables the upper cut).

    Entities may come out empty; they are kept.
    """
    n = len(vectors)
    df = Counter()
    for v in vectors:
        df.update(v.entries.keys())
    limit = None if max_df_fraction is None else max_df_fraction * n
    keep = {f for f, c in df.items() if c >= min_entity_freq and (limit is None or c <= limit)}
    return [FeatureVector(v.uri, {f: w for f, w in v.entries.items() if f in keep}) for v in vectors]


def distance(a, b) -> float:
    """Euclidean distance over the union of feature ids (missing = 0)."""
    a = a.entries if isinstance(a, FeatureVector) else a
    b = b.entries if isinstance(b, FeatureVector) else b
    total = 0.0
    for f, w in a.items():
        diff = w - b.get(f, 0.0)
        total += diff * diff
    for f, w in b.items():
        if f not in a:
            total += w * w
    return math.sqrt(total)


def type_hash(type_iri: str) -> str:
    return hashlib.sha1(type_iri.encode("utf-8")).hexdigest()[:12]


def vectors_path(directory, type_iri: str) -> Path:
    return Path(directory) / f"vectors-{type_hash(type_iri)}.tsv"


def write_vectors(vectors, path):
    """One line per entity: ``uri`` then ``<TAB>feature=weight`` pairs sorted
    by feature id; weights in fixed-width ``%.17e``. Empty vectors are a bare
    uri line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in sorted(vectors, key=lambda v: v.uri):
            cells = [v.uri] + [f"{f}={v.entries[f]:.17e}" for f in sorted(v.entries)]
            fh.write("\t".join(cells) + "\n")


def read_vectors(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            cells = line.rstrip("\n").split("\t")
            entries = {}
            for cell in cells[1:]:
                f, _, w = cell.rpartition("=")
                entries[f] = float(w)
            out.append(FeatureVector(cells[0], entries))
    return out
