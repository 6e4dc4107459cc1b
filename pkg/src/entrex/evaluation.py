"""Retrieval metrics over graded qrels, paired t-tests and report formatting."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betainc

RELEVANT_GRADE = 3
CUTOFFS = tuple(range(1, 11))
ZERO_VARIANCE_TOL = 1e-12


def _relevant(qrels_q: dict, threshold: int) -> set:
    return {u for u, g in qrels_q.items() if g >= threshold}


def p_at_k(ranked, qrels_q, k, threshold=RELEVANT_GRADE) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = _relevant(qrels_q, threshold)
    return sum(1 for u in ranked[:k] if u in rel) / k


def r_at_k(ranked, qrels_q, k, threshold=RELEVANT_GRADE) -> Optional[float]:
    """None when the query has no relevant entity (excluded from means)."""
    rel = _relevant(qrels_q, threshold)
    if not rel:
        return None
    return sum(1 for u in ranked[:k] if u in rel) / len(rel)


def avg_r(ranked, qrels_q, threshold=RELEVANT_GRADE, depth=10) -> Optional[float]:
    vals = [r_at_k(ranked, qrels_q, k, threshold) for k in range(1, depth + 1)]
    if vals[0] is None:
        return None
    return sum(vals) / depth


def average_precision(ranked, qrels_q, threshold=RELEVANT_GRADE) -> Optional[float]:
    rel = _relevant(qrels_q, threshold)
    if not rel:
        return None
    hits = 0
    total = 0.0
    for i, u in enumerate(ranked, start=1):
        if u in rel:
            hits += 1
            total += hits / i
    return total / len(rel)


def _dcg(gains) -> float:
    return sum(g if i == 1 else g / math.log2(i) for i, g in enumerate(gains, start=1))


def ndcg_at_k(ranked, qrels_q, k) -> float:
    """Gains are grade - 1 (unjudged 0); the first rank is undiscounted."""
    gains = [max(qrels_q.get(u, 1) - 1, 0) for u in ranked[:k]]
    ideal = sorted((max(g - 1, 0) for g in qrels_q.values()), reverse=True)[:k]
    idcg = _dcg(ideal)
    return _dcg(gains) / idcg if idcg > 0 else 0.0


def mean_average_precision(run: dict, qrels: dict, threshold=RELEVANT_GRADE) -> float:
    aps = [average_precision(run.get(q, []), qrels[q], threshold) for q in sorted(qrels)]
    aps = [a for a in aps if a is not None]
    return sum(aps) / len(aps) if aps else 0.0


@dataclass
class TTestResult:
    t: float
    p: float
    degenerate: bool = False


def t_two_sided_p(t: float, dof: int) -> float:
    """Two-tailed p-value of Student's t via the regularised incomplete beta."""
    return float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def paired_t_test(a, b) -> TTestResult:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("paired t-test needs two equal-length arrays with n >= 2")
    d = a - b
    n = len(d)
    mean = d.mean()
    sd = d.std(ddof=1)
    # differences equal up to rounding (e.g. 0.2 - 0.1 vs 0.3 - 0.2) count as zero variance
    eps = ZERO_VARIANCE_TOL * max(1.0, float(np.abs(d).max()))
    if not np.isfinite(sd) or sd <= eps:
        if abs(mean) <= eps:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(float(t), t_two_sided_p(t, n - 1))


def relevance_histogram(run: dict, qrels: dict, k: int = 10) -> dict:
    counts = {g: 0 for g in range(2, 6)}
    for q, ranked in run.items():
        judged = qrels.get(q, {})
        for u in ranked[:k]:
            g = judged.get(u)
            if g in counts:
                counts[g] += 1
    return counts


# --- per-run report -------------------------------------------------------------

@dataclass
class MetricReport:
    name: str
    queries: list
    per_query: dict = field(default_factory=dict)   # metric -> list aligned with queries (None = excluded)
    excluded: list = field(default_factory=list)

    def mean(self, metric: str) -> float:
        vals = [v for v in self.per_query[metric] if v is not None]
        return sum(vals) / len(vals) if vals else 0.0

    def paired(self, metric: str) -> list:
        return [0.0 if v is None else v for v in self.per_query[metric]]

    def summary(self) -> dict:
        return {m: self.mean(m) for m in self.per_query}


def evaluate(run: dict, qrels: dict, name: str = "run", threshold=RELEVANT_GRADE) -> MetricReport:
    """Evaluate over every query in ``qrels``; missing queries rank nothing."""
    queries = sorted(qrels)
    per = defaultdict(list)
    excluded = []
    for q in queries:
        ranked = run.get(q, [])
        judged = qrels[q]
        for k in CUTOFFS:
            per[f"P@{k}"].append(p_at_k(ranked, judged, k, threshold))
        for k in CUTOFFS:
            per[f"R@{k}"].append(r_at_k(ranked, judged, k, threshold))
        per["AP"].append(average_precision(ranked, judged, threshold))
        per["Avg(R)"].append(avg_r(ranked, judged, threshold))
        for k in CUTOFFS:
            per[f"NDCG@{k}"].append(ndcg_at_k(ranked, judged, k))
        if per["AP"][-1] is None:
            excluded.append(q)
    return MetricReport(name, queries, dict(per), excluded)


TABLE_METRICS = ("P@1", "P@5", "P@10", "R@5", "R@10", "AP", "Avg(R)", "NDCG@10")
DELTA_METRICS = ("P@10", "AP", "R@10")


def format_table(reports) -> str:
    header = ["run"] + ["MAP" if m == "AP" else m for m in TABLE_METRICS]
    rows = [[r.name] + [f"{r.mean(m):.4f}" for m in TABLE_METRICS] for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header] + rows]
    return "\n".join(lines) + "\n"


def compare(reports) -> list:
    """Pairwise deltas and paired t-tests (second minus first) for each pair."""
    out = []
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            a, b = reports[i], reports[j]
            row = {"a": a.name, "b": b.name}
            for m in DELTA_METRICS:
                label = "MAP" if m == "AP" else m
                row[f"delta_{label}"] = b.mean(m) - a.mean(m)
                test = paired_t_test(b.paired(m), a.paired(m)) if len(a.queries) >= 2 else None
                row[f"p_{label}"] = test.p if test else None
                row[f"t_{label}"] = test.t if test else None
            out.append(row)
    return out


def format_comparisons(rows) -> str:
    lines = []
    for r in rows:
        parts = []
        for label in ("P@10", "MAP", "R@10"):
            p = r[f"p_{label}"]
            ptxt = "n/a" if p is None else f"{p:.4g}"
            parts.append(f"Δ{label}={r[f'delta_{label}']:+.4f} (p={ptxt})")
        lines.append(f"{r['b']} vs {r['a']}: " + "  ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def summary_json(reports, comparisons) -> str:
    data = {
        "runs": {r.name: {"means": r.summary(), "excluded_queries": r.excluded,
                          "queries": r.queries} for r in reports},
        "comparisons": comparisons,
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# --- files ------------------------------------------------------------------------

def read_qrels(path) -> dict:
    """``qid 0 uri grade`` per line; grades must be integers in 1..5."""
    qrels = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            cells = line.split()
            if not cells or cells[0].startswith("#"):
                continue
            if len(cells) != 4:
                raise ValueError(f"{path}:{n}: expected 4 columns")
            qid, _, uri, grade = cells
            g = int(grade)
            if not 1 <= g <= 5:
                raise ValueError(f"{path}:{n}: grade {g} outside 1..5")
            qrels[qid][uri] = g
    return dict(qrels)


def read_run(path) -> dict:
    """TREC run file -> qid -> uris ordered by rank."""
    rows = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            cells = line.split()
            if len(cells) < 6:
                continue
            qid, _, uri, rank = cells[:4]
            rows[qid].append((int(rank), uri))
    return {q: [u for _, u in sorted(v)] for q, v in rows.items()}


def run_tag_of(path) -> str:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            cells = line.split()
            if len(cells) >= 6:
                return cells[5]
    return ""
