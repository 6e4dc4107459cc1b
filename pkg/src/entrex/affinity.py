"""Query-type affinity: smoothed p(entity type | query type) and the gamma score."""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass

from .store import UNTYPED

EPSILON = 1e-9


class EmptyTrainingSet(ValueError):
    pass


@dataclass
class AffinityModel:
    alpha: float
    query_types: list
    entity_types: list
    rows: list          # rows[i][j] = p(entity_types[j] | query_types[i])
    denominators: list  # per query type: sum of counts + alpha * |T_e|

    def __post_init__(self):
        self._q = {t: i for i, t in enumerate(self.query_types)}
        self._e = {t: j for j, t in enumerate(self.entity_types)}

    def probability(self, t_e: str, t_q: str) -> float:
        i = self._q[t_q]
        j = self._e.get(t_e)
        if j is None:
            # unseen entity type: smoothing mass only
            denom = self.denominators[i]
            return self.alpha / denom if denom > 0 else 0.0
        return self.rows[i][j]

    def gamma(self, t_e: str, t_q: str) -> float:
        """p(t_e|t_q) / sum over other query types of (1 - p(t_e|t_q')).

        Unknown query type: uniform 1/|T_e|. Vanishing denominator (e.g. a
        single query type): gamma falls back to p(t_e|t_q).
        """
        if t_q not in self._q:
            return 1.0 / len(self.entity_types) if self.entity_types else 1.0
        p = self.probability(t_e, t_q)
        denom = sum(1.0 - self.probability(t_e, other) for other in self.query_types if other != t_q)
        if denom < EPSILON:
            return p
        return p / denom

    def entity_gamma(self, entity_types, t_q: str) -> float:
        """Max gamma over an entity's declared types (untyped -> pseudo-type)."""
        types = sorted(entity_types) or [UNTYPED]
        return max(self.gamma(t, t_q) for t in types)

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "query_types": self.query_types,
            "entity_types": self.entity_types,
            "rows": self.rows,
            "denominators": self.denominators,
        }, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AffinityModel":
        data = json.loads(text)
        return cls(data["alpha"], data["query_types"], data["entity_types"], data["rows"], data["denominators"])


def train(judgments, alpha: float = 1.0, entity_types=None) -> AffinityModel:
    """Fit from ``(query_id, t_q, entity type list)`` judgments.

    Each relevant entity contributes each of its types once. ``entity_types``
    widens the type vocabulary beyond the ones observed.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    counts = defaultdict(Counter)
    seen = set(entity_types or ())
    n = 0
    for _, t_q, types in judgments:
        n += 1
        counts[t_q]  # register the query type even with no types
        for t in types:
            counts[t_q][t] += 1
            seen.add(t)
    if n == 0:
        raise EmptyTrainingSet("no judgments to train on")
    q_types = sorted(counts)
    e_types = sorted(seen)
    rows, denoms = [], []
    for t_q in q_types:
        c = counts[t_q]
        denom = sum(c.values()) + alpha * len(e_types)
        denoms.append(denom)
        rows.append([(c.get(t, 0) + alpha) / denom if denom > 0 else 0.0 for t in e_types])
    return AffinityModel(alpha, q_types, e_types, rows, denoms)


def read_training_file(path, store, min_grade: int = 3) -> list:
    """Rows ``query_id<TAB>query_type<TAB>entity_uri<TAB>grade``; entities below
    ``min_grade`` or missing from the store are ignored."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or row[0].startswith("#"):
                continue
            qid, t_q, uri, grade = row[:4]
            if int(grade) < min_grade or uri not in store:
                continue
            out.append((qid, t_q, store.get(uri).effective_types()))
    return out
