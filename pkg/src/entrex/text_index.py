"""Fielded inverted index (title/body) with BM25F scoring.

Index directory layout, all plain text and deterministic:

``dictionary.dat``  ``term<TAB>df<TAB>offset<TAB>length`` sorted by term;
                    offset/length address the term's line in postings.dat.
``postings.dat``    one line per term: ``docno:tf_title:tf_body`` entries
                    separated by spaces, docno ascending.
``doclens.dat``     ``uri<TAB>len_title<TAB>len_body`` in docno order.
``stats.json``      N and average field lengths.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .store import UnknownUri

_TOKEN = re.compile(r"[^\W_]+")

TITLE_ONLY = "title_only"
BODY_ONLY = "body_only"
BOTH = "both"
FIELD_MODES = (TITLE_ONLY, BODY_ONLY, BOTH)
INDEX_FILES = ("postings.dat", "dictionary.dat", "doclens.dat", "stats.json")


def tokenize(text: str) -> list:
    """Lowercase and split on every non-alphanumeric code point."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class Bm25fParams:
    k1: float = 1.2
    b_title: float = 0.75
    b_body: float = 0.75
    w_title: float = 2.0
    w_body: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")
        for b in (self.b_title, self.b_body):
            if not 0.0 <= b <= 1.0:
                raise ValueError("b parameters must lie in [0, 1]")
        if self.w_title < 0 or self.w_body < 0 or (self.w_title == 0 and self.w_body == 0):
            raise ValueError("field weights must be non-negative with at least one positive")


@dataclass(frozen=True)
class ScoredEntity:
    uri: str
    score: float
    rank: int


class EmptyList(ValueError):
    pass


class InvertedIndex:
    def __init__(self, uris, title_lens, body_lens, postings):
        self.uris = list(uris)
        self.docno = {u: i for i, u in enumerate(self.uris)}
        self.title_lens = list(title_lens)
        self.body_lens = list(body_lens)
        # term -> {docno: (tf_title, tf_body)}
        self.postings = postings
        n = len(self.uris)
        self.N = n
        self.avg_title = sum(self.title_lens) / n if n else 0.0
        self.avg_body = sum(self.body_lens) / n if n else 0.0

    @classmethod
    def from_documents(cls, docs):
        """Build from (uri, title_tokens, body_tokens) triples."""
        docs = sorted(docs, key=lambda d: d[0])
        postings = {}
        for docno, (_, title, body) in enumerate(docs):
            tt, bt = Counter(title), Counter(body)
            for term in set(tt) | set(bt):
                postings.setdefault(term, {})[docno] = (tt.get(term, 0), bt.get(term, 0))
        return cls([d[0] for d in docs], [len(d[1]) for d in docs], [len(d[2]) for d in docs], postings)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def _weights(self, params: Bm25fParams, field_mode: str) -> tuple:
        if field_mode not in FIELD_MODES:
            raise ValueError(f"unknown field mode {field_mode!r}")
        w_t = params.w_title if field_mode in (TITLE_ONLY, BOTH) else 0.0
        w_b = params.w_body if field_mode in (BODY_ONLY, BOTH) else 0.0
        return w_t, w_b

    def _score_docno(self, query_tokens, docno, params, w_t, w_b) -> float:
        score = 0.0
        for term in query_tokens:
            entry = self.postings.get(term, {}).get(docno)
            if entry is None:
                continue
            s = 0.0
            if w_t and entry[0]:
                s += w_t * entry[0] / _norm(params.b_title, self.title_lens[docno], self.avg_title)
            if w_b and entry[1]:
                s += w_b * entry[1] / _norm(params.b_body, self.body_lens[docno], self.avg_body)
            if s > 0:
                score += self.idf(term) * s / (params.k1 + s)
        return score

    def bm25f_score(self, query_tokens, uri, params=Bm25fParams(), field_mode=BOTH) -> float:
        docno = self.docno.get(uri)
        if docno is None:
            raise UnknownUri(uri)
        w_t, w_b = self._weights(params, field_mode)
        return self._score_docno(query_tokens, docno, params, w_t, w_b)

    def search(self, query_tokens, field_mode=BOTH, k=10, params=Bm25fParams()) -> list:
        if k < 1:
            raise ValueError("k must be >= 1")
        w_t, w_b = self._weights(params, field_mode)
        candidates = set()
        for term in query_tokens:
            candidates.update(self.postings.get(term, ()))
        scored = []
        for docno in candidates:
            s = self._score_docno(query_tokens, docno, params, w_t, w_b)
            if s > 0:
                scored.append((-s, self.uris[docno]))
        scored.sort()
        return [ScoredEntity(uri, -neg, rank) for rank, (neg, uri) in enumerate(scored[:k], start=1)]

    # --- persistence ---

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        dictionary = []
        with open(directory / "postings.dat", "wb") as fh:
            for term in sorted(self.postings):
                plist = self.postings[term]
                line = " ".join(f"{d}:{tt}:{bt}" for d, (tt, bt) in sorted(plist.items()))
                data = (line + "\n").encode("utf-8")
                dictionary.append(f"{term}\t{len(plist)}\t{fh.tell()}\t{len(data)}\n")
                fh.write(data)
        with open(directory / "dictionary.dat", "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(dictionary)
        with open(directory / "doclens.dat", "w", encoding="utf-8", newline="\n") as fh:
            for uri, lt, lb in zip(self.uris, self.title_lens, self.body_lens):
                fh.write(f"{uri}\t{lt}\t{lb}\n")
        stats = {"N": self.N, "avg_title_length": self.avg_title, "avg_body_length": self.avg_body}
        (directory / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        uris, tl, bl = [], [], []
        with open(directory / "doclens.dat", encoding="utf-8") as fh:
            for line in fh:
                uri, lt, lb = line.rstrip("\n").split("\t")
                uris.append(uri)
                tl.append(int(lt))
                bl.append(int(lb))
        postings = {}
        terms = []
        with open(directory / "dictionary.dat", encoding="utf-8") as fh:
            for line in fh:
                terms.append(line.rstrip("\n").split("\t")[0])
        with open(directory / "postings.dat", encoding="utf-8") as fh:
            for term, line in zip(terms, fh):
                plist = {}
                for entry in line.split():
                    d, tt, bt = entry.split(":")
                    plist[int(d)] = (int(tt), int(bt))
                postings[term] = plist
        return cls(uris, tl, bl, postings)


def _norm(b: float, length: int, avg: float) -> float:
    if avg <= 0:
        return 1.0
    return 1.0 + b * (length / avg - 1.0)


def profile_document(profile) -> tuple:
    title = [t for lit in profile.title_literals for t in tokenize(lit)]
    body = [t for lit in profile.body_literals for t in tokenize(lit)]
    return profile.uri, title, body


def build_index(store) -> InvertedIndex:
    return InvertedIndex.from_documents(profile_document(p) for p in store)


def normalize_scores(results) -> list:
    """Divide every score by the list maximum (top entity maps to 1.0)."""
    scores = [r.score if hasattr(r, "score") else float(r) for r in results]
    if not scores:
        raise EmptyList("cannot normalise an empty result list")
    top = max(scores)
    if top <= 0:
        return [0.0 for _ in scores]
    return [s / top for s in scores]
