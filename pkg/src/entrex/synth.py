"""Deterministic synthetic corpus with planted entity clusters.

Planted clusters come in families. A cluster's description template
inherits ``shared_fraction`` of its tokens from the family template and
draws the rest from a private pool; members copy the template with
``near_duplicate_noise`` token replacement and share the cluster's
structural attributes. Families are what locality-sensitive bucketing tends
to lump together, clusters are what the clustering step must separate. Its query is a fresh two-word name that only the cluster's
visible members carry in their title; the hidden members never mention it,
so a lexical baseline cannot reach them but the clusters can.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .rdf import RDF_TYPE, Literal, Quad, format_quad
from .store import OWL_SAME_AS, RDFS

BASE = "http://synth.example.org/"
DESCRIPTION = BASE + "vocab/description"
PART_OF = BASE + "vocab/partOf"
ATTRIBUTE = BASE + "vocab/attribute"

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]


@dataclass(frozen=True)
class SynthSpec:
    num_types: int = 3
    clusters_per_type: int = 4
    entities_per_cluster: int = 8
    vocab_size: int = 2000
    near_duplicate_noise: float = 0.1
    hidden_fraction: float = 0.875
    sameas_fraction: float = 0.0
    pool_size: int = 14
    family_size: int = 2
    shared_fraction: float = 0.85
    literals_per_entity: int = 3
    tokens_per_literal: int = 6
    attributes_per_cluster: int = 3
    annotate_queries: bool = True
    seed: int = 7

    def __post_init__(self):
        for name in ("num_types", "clusters_per_type", "entities_per_cluster", "vocab_size",
                     "pool_size", "literals_per_entity", "tokens_per_literal", "family_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("near_duplicate_noise", "hidden_fraction", "sameas_fraction", "shared_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.reserved_words > self.vocab_size:
            raise ValueError("vocab_size too small for disjoint cluster pools")

    @property
    def families_per_type(self) -> int:
        return -(-self.clusters_per_type // self.family_size)

    @property
    def reserved_words(self) -> int:
        per_type = 1 + self.families_per_type * self.pool_size + self.clusters_per_type * (self.pool_size + 2)
        return self.num_types * per_type

    @property
    def hidden_per_cluster(self) -> int:
        n = self.entities_per_cluster
        return min(max(round(self.hidden_fraction * n), 0), n - 1)


@dataclass
class SynthCorpus:
    quads: list
    queries: list        # (qid, text, type)
    qrels: list          # (qid, uri, grade)
    labels: dict         # uri -> planted cluster label
    visible: dict        # qid -> visible member uris


def make_vocabulary(size: int, rng: random.Random) -> list:
    words = set()
    while len(words) < size:
        syllables = rng.randint(2, 4)
        words.add("".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)))
    words = sorted(words)
    rng.shuffle(words)
    return words


def generate(spec: SynthSpec) -> SynthCorpus:
    rng = random.Random(spec.seed)
    vocab = make_vocabulary(spec.vocab_size, rng)
    cursor = 0

    def take(n):
        nonlocal cursor
        out = vocab[cursor:cursor + n]
        cursor += n
        return out

    noise_vocab = vocab[spec.reserved_words:] or vocab
    n_entities = spec.num_types * spec.clusters_per_type * spec.entities_per_cluster
    ids = list(range(n_entities))
    rng.shuffle(ids)
    width = len(str(n_entities))
    next_id = iter(ids)

    quads, queries, qrels = [], [], []
    labels, visible = {}, {}
    hidden_all = []  # (hidden uri, visible uris of its cluster)
    qno = 0
    for t in range(spec.num_types):
        type_iri = f"{BASE}type/T{t}"
        type_word = take(1)[0]
        families = []
        for f in range(spec.families_per_type):
            fpool = take(spec.pool_size)
            families.append((f"{BASE}family/T{t}F{f}", [
                [rng.choice(fpool) for _ in range(spec.tokens_per_literal)]
                for _ in range(spec.literals_per_entity)
            ]))
        for c in range(spec.clusters_per_type):
            family_hub, family_templates = families[c // spec.family_size]
            qno += 1
            qid = f"q{qno:03d}"
            label = f"T{t}C{c}"
            hub = f"{BASE}hub/{label}"
            name = take(2)
            pool = take(spec.pool_size)
            attrs = [f"{BASE}attr/{label}/{i}" for i in range(spec.attributes_per_cluster)]
            query_text = " ".join(name)
            queries.append((qid, query_text, type_iri))
            templates = [
                [w if rng.random() < spec.shared_fraction else rng.choice(pool) for w in ft]
                for ft in family_templates
            ]
            members = []
            n_hidden = spec.hidden_per_cluster
            for m in range(spec.entities_per_cluster):
                uri = f"{BASE}entity/e{next(next_id):0{width}d}"
                members.append(uri)
                labels[uri] = label
                hidden = m >= spec.entities_per_cluster - n_hidden
                if hidden:
                    title = " ".join(rng.sample(pool, 2))
                else:
                    title = f"{query_text} {rng.choice(pool)}"
                quads.append(Quad(uri, RDF_TYPE, type_iri))
                quads.append(Quad(uri, RDFS + "label", Literal(title, language="en")))
                for template in templates:
                    words = [rng.choice(noise_vocab) if rng.random() < spec.near_duplicate_noise else w
                             for w in template]
                    quads.append(Quad(uri, DESCRIPTION, Literal(" ".join(words + [type_word]))))
                quads.append(Quad(uri, PART_OF, hub))
                quads.append(Quad(uri, PART_OF, family_hub))
                for a in attrs:
                    if rng.random() < 0.8:
                        quads.append(Quad(uri, ATTRIBUTE, a))
                qrels.append((qid, uri, 5))
            n_visible = spec.entities_per_cluster - n_hidden
            visible[qid] = members[:n_visible]
            hidden_all.extend((u, members[:n_visible]) for u in members[n_visible:])

    if spec.sameas_fraction > 0 and hidden_all:
        count = round(spec.sameas_fraction * len(hidden_all))
        for uri, vis in sorted(rng.sample(hidden_all, count)):
            quads.append(Quad(uri, OWL_SAME_AS, rng.choice(vis)))
    return SynthCorpus(quads, queries, qrels, labels, visible)


def write_corpus(corpus: SynthCorpus, spec: SynthSpec, out_dir) -> dict:
    """Write corpus.nq, queries.tsv, qrels.txt, train.tsv, labels.tsv and
    synth.json into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "corpus.nq",
        "queries": out / "queries.tsv",
        "qrels": out / "qrels.txt",
        "judgments": out / "train.tsv",
        "labels": out / "labels.tsv",
    }
    graph = BASE + "graph/main"
    with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
        for q in corpus.quads:
            fh.write(format_quad(Quad(q.subject, q.predicate, q.object, graph)) + "\n")
    qtype = {qid: t for qid, _, t in corpus.queries}
    with open(paths["queries"], "w", encoding="utf-8", newline="\n") as fh:
        for qid, text, t in corpus.queries:
            fh.write(f"{qid}\t{text}\t{t}\n" if spec.annotate_queries else f"{qid}\t{text}\n")
    with open(paths["qrels"], "w", encoding="utf-8", newline="\n") as fh:
        for qid, uri, grade in corpus.qrels:
            fh.write(f"{qid} 0 {uri} {grade}\n")
    with open(paths["judgments"], "w", encoding="utf-8", newline="\n") as fh:
        for qid, uri, grade in corpus.qrels:
            fh.write(f"{qid}\t{qtype[qid]}\t{uri}\t{grade}\n")
    with open(paths["labels"], "w", encoding="utf-8", newline="\n") as fh:
        for uri in sorted(corpus.labels):
            fh.write(f"{uri}\t{corpus.labels[uri]}\n")
    (out / "synth.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}
