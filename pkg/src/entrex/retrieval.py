"""Online retrieval: query analysis, BM25F baseline, cluster and link
expansion, and the final affinity/context re-ranking."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import clustering
from .features import distance, read_vectors, vectors_path
from .store import UNTYPED
from .text_index import BODY_ONLY, TITLE_ONLY, Bm25fParams, normalize_scores, tokenize

log = logging.getLogger(__name__)

MODES = ("B", "S1", "XM", "SP")
MODE_ALGORITHM = {"XM": clustering.XMEANS, "SP": clustering.SPECTRAL}
FIELD_CODES = {TITLE_ONLY: "t", BODY_ONLY: "b"}

BASELINE, EXPANDED, LINK_EXPANDED = "baseline", "expanded", "link_expanded"


class EmptyQuery(ValueError):
    pass


@dataclass(frozen=True)
class RankingParams:
    lambda_sim: float = 0.5
    lambda_alpha: float = 0.5
    cluster_size_max: int = 10
    per_cluster: int = 1
    epsilon: float = 1e-6
    baseline_depth: int = 10
    s1_depth: int = 1
    literal_rank_score: bool = False

    def __post_init__(self):
        for lam in (self.lambda_sim, self.lambda_alpha):
            if not 0.0 <= lam <= 1.0:
                raise ValueError("lambdas must lie in [0, 1]")
        if self.cluster_size_max < 1 or self.per_cluster < 1:
            raise ValueError("cluster_size_max and per_cluster must be >= 1")
        if self.baseline_depth < 1 or self.s1_depth < 1:
            raise ValueError("baseline_depth and s1_depth must be >= 1")


@dataclass(frozen=True)
class QueryRecord:
    id: str
    text: str
    annotated_type: Optional[str] = None


@dataclass
class QueryAnalysis:
    entity_span: list
    context_terms: list
    query_type: str
    type_source: str


@dataclass
class ExpandedCandidate:
    uri: str
    source_entity: str
    source_rank: int
    cluster_id: str
    sim: float


@dataclass
class LinkCandidate:
    uri: str
    source_entity: str
    source_rank: int
    hops: int
    score: float


@dataclass
class RankedResult:
    uri: str
    alpha: float
    origin: str
    rank: int


# --- scoring primitives -------------------------------------------------------

def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def string_distance(q_text: str, title: Optional[str]) -> float:
    """Normalised Levenshtein distance between the query and a title."""
    if not title:
        return 1.0
    a, b = q_text.lower(), title.lower()
    longest = max(len(a), len(b))
    return levenshtein(a, b) / longest if longest else 0.0


def query_biased_sim(phi_c: float, phi_b: float, d: float, lam: float = 0.5, eps: float = 1e-6) -> float:
    """lam * phi_c / max(eps, phi_b) + (1 - lam) * d. Lower means closer."""
    return lam * phi_c / max(eps, phi_b) + (1.0 - lam) * d


def context_score(context_terms, title_literals) -> Optional[float]:
    """Share of context terms found among the title tokens; None when there
    are no context terms."""
    if not context_terms:
        return None
    tokens = {t for lit in title_literals for t in tokenize(lit)}
    return sum(1 for c in context_terms if c in tokens) / len(context_terms)


def expanded_rank_scores(candidates, literal: bool = False) -> dict:
    """Rank score of cluster-expanded candidates.

    Default: (1 - min-max normalised sim) / source_rank. ``literal`` keeps
    the raw sim / source_rank form.
    """
    if not candidates:
        return {}
    if literal:
        return {c.uri: c.sim / c.source_rank for c in candidates}
    sims = [c.sim for c in candidates]
    lo, hi = min(sims), max(sims)
    span = hi - lo
    out = {}
    for c in candidates:
        norm = (c.sim - lo) / span if span > 0 else 0.0
        out[c.uri] = (1.0 - norm) / c.source_rank
    return out


def combine(rank_score: float, gamma: float, context: Optional[float], lam: float = 0.5) -> float:
    base = rank_score * gamma
    if context is None:
        return base
    return lam * base + (1.0 - lam) * context


# --- the retriever ------------------------------------------------------------

class Retriever:
    """Holds the read-only artifacts needed at query time.

    Cluster and vector files are loaded lazily, once per algorithm/type.
    """

    def __init__(self, store, index, params: RankingParams = RankingParams(),
                 bm25f: Bm25fParams = Bm25fParams(), affinity=None,
                 vectors_dir=None, clusters_dir=None):
        self.store = store
        self.index = index
        self.params = params
        self.bm25f = bm25f
        self.affinity = affinity
        self.vectors_dir = Path(vectors_dir) if vectors_dir else None
        self.clusters_dir = Path(clusters_dir) if clusters_dir else None
        self._titles = None
        self._vectors = {}
        self._clusters = {}

    # artifacts

    def title_set(self) -> set:
        if self._titles is None:
            titles = set()
            for p in self.store:
                for lit in p.title_literals:
                    toks = tuple(tokenize(lit))
                    if toks:
                        titles.add(toks)
            self._titles = titles
        return self._titles

    def vectors(self, entity_type: str) -> dict:
        if entity_type not in self._vectors:
            path = vectors_path(self.vectors_dir, entity_type)
            self._vectors[entity_type] = {v.uri: v for v in read_vectors(path)}
        return self._vectors[entity_type]

    def clusters(self, algorithm: str) -> tuple:
        if algorithm not in self._clusters:
            self._clusters[algorithm] = (
                clustering.read_clusters(self.clusters_dir, algorithm),
                clustering.read_cluster_map(self.clusters_dir, algorithm),
            )
        return self._clusters[algorithm]

    # stages

    def analyze(self, query: QueryRecord) -> QueryAnalysis:
        tokens = tokenize(query.text)
        if not tokens:
            raise EmptyQuery(query.id)
        titles = self.title_set()
        span_at = None
        for length in range(len(tokens), 0, -1):
            for start in range(len(tokens) - length + 1):
                if tuple(tokens[start:start + length]) in titles:
                    span_at = (start, length)
                    break
            if span_at:
                break
        if span_at is None:
            span, context = list(tokens), []
        else:
            start, length = span_at
            span = tokens[start:start + length]
            context = tokens[:start] + tokens[start + length:]
        if query.annotated_type:
            return QueryAnalysis(span, context, query.annotated_type, "annotation")
        return QueryAnalysis(span, context, self.infer_type(span), "inferred")

    def infer_type(self, span_tokens) -> str:
        top = self.index.search(span_tokens, TITLE_ONLY, 10, self.bm25f)
        votes = Counter()
        for r in top:
            votes.update(self.store.get(r.uri).effective_types())
        if not votes:
            return UNTYPED
        best = max(votes.values())
        return min(t for t, c in votes.items() if c == best)

    def baseline(self, query_text: str, field_mode: str) -> list:
        return self.index.search(tokenize(query_text), field_mode, self.params.baseline_depth, self.bm25f)

    def phi(self, q_text: str, uri: str) -> float:
        return string_distance(q_text, self.store.get(uri).primary_title)

    def sim(self, q_text: str, e_c: str, e_b: str, entity_type: str) -> float:
        vecs = self.vectors(entity_type)
        d = distance(vecs[e_b], vecs[e_c])
        return query_biased_sim(self.phi(q_text, e_c), self.phi(q_text, e_b), d,
                                self.params.lambda_sim, self.params.epsilon)

    def expand(self, q_text: str, baseline, algorithm: str) -> list:
        """Cluster-based expansion of the baseline list.

        Baseline members are never candidates; each small-enough cluster of
        each baseline entity contributes its ``per_cluster`` lowest-sim
        members; duplicates keep the lowest sim, then the better source rank.
        """
        records, cluster_map = self.clusters(algorithm)
        in_baseline = {r.uri for r in baseline}
        best = {}
        for r in baseline:
            for cid in cluster_map.get(r.uri, ()):
                rec = records[cid]
                if len(rec.members) > self.params.cluster_size_max:
                    continue
                scored = sorted(
                    (self.sim(q_text, m, r.uri, rec.entity_type), m)
                    for m in rec.members if m not in in_baseline
                )
                for s, m in scored[:self.params.per_cluster]:
                    prev = best.get(m)
                    if prev is None or (s, r.rank) < (prev.sim, prev.source_rank):
                        best[m] = ExpandedCandidate(m, r.uri, r.rank, cid, s)
        return sorted(best.values(), key=lambda c: (c.sim, c.source_rank, c.uri))

    def s1_expand(self, baseline, depth: Optional[int] = None) -> list:
        """Follow explicit-similarity links (either direction) up to ``depth`` hops."""
        depth = depth or self.params.s1_depth
        links = self.store.similarity_links()
        in_baseline = {r.uri for r in baseline}
        norm = dict(zip((r.uri for r in baseline), normalize_scores(baseline))) if baseline else {}
        best = {}
        for r in baseline:
            frontier, seen = [r.uri], {r.uri}
            for hop in range(1, depth + 1):
                nxt = []
                for u in frontier:
                    for v in links.get(u, ()):
                        if v in seen:
                            continue
                        seen.add(v)
                        nxt.append(v)
                        if v in in_baseline or v not in self.store:
                            continue
                        score = norm[r.uri] / hop
                        prev = best.get(v)
                        if prev is None or (-score, r.rank) < (-prev.score, prev.source_rank):
                            best[v] = LinkCandidate(v, r.uri, r.rank, hop, score)
                frontier = nxt
        return sorted(best.values(), key=lambda c: (-c.score, c.source_rank, c.uri))

    def gamma(self, uri: str, t_q: str) -> float:
        if self.affinity is None:
            return 1.0
        return self.affinity.entity_gamma(self.store.get(uri).types, t_q)

    def rank(self, query: QueryRecord, mode: str = "B", field_mode: str = TITLE_ONLY, k: int = 10) -> list:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        analysis = self.analyze(query)
        baseline = self.baseline(query.text, field_mode)
        scores = {}
        origin = {}
        if baseline:
            for r, s in zip(baseline, normalize_scores(baseline)):
                scores[r.uri] = s
                origin[r.uri] = BASELINE
        if mode == "S1":
            for c in self.s1_expand(baseline):
                scores[c.uri] = c.score
                origin[c.uri] = LINK_EXPANDED
        elif mode in MODE_ALGORITHM:
            cands = self.expand(query.text, baseline, MODE_ALGORITHM[mode])
            for uri, s in expanded_rank_scores(cands, self.params.literal_rank_score).items():
                scores[uri] = s
                origin[uri] = EXPANDED
        scored = []
        for uri, rs in scores.items():
            ctx = context_score(analysis.context_terms, self.store.get(uri).title_literals)
            alpha = combine(rs, self.gamma(uri, analysis.query_type), ctx, self.params.lambda_alpha)
            scored.append((-alpha, uri))
        scored.sort()
        return [RankedResult(uri, -neg, origin[uri], i) for i, (neg, uri) in enumerate(scored[:k], start=1)]


# --- files ----------------------------------------------------------------------

def read_queries(path) -> list:
    """TSV ``qid<TAB>text[<TAB>query_type]``; blank and '#' lines skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            qtype = cells[2].strip() if len(cells) > 2 and cells[2].strip() else None
            out.append(QueryRecord(cells[0], cells[1], qtype))
    return out


def run_tag(mode: str, field_mode: str, config_hash: str = "") -> str:
    tag = f"{mode}_{FIELD_CODES.get(field_mode, field_mode)}"
    return f"{tag}-{config_hash}" if config_hash else tag


def format_run(qid: str, results, tag: str) -> str:
    return "".join(f"{qid} Q0 {r.uri} {r.rank} {r.alpha:.12g} {tag}\n" for r in results)
