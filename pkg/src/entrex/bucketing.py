"""MinHash signatures and LSH banding into disjoint buckets.

Hashing: every feature key gets a 64-bit base hash (blake2b), and the i-th
hash function is ``splitmix64(base ^ seed_i)`` with seeds drawn from a
splitmix64 stream started at ``LshParams.seed``. Buckets are the connected
components of the band-collision graph.
"""

from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
SENTINEL = np.uint64(MASK64)


@dataclass(frozen=True)
class LshParams:
    num_hashes: int = 128
    bands: int = 32
    rows: int = 4
    seed: int = 0x5EED
    max_bucket_size: int = 2000

    def __post_init__(self):
        if self.bands * self.rows != self.num_hashes:
            raise ValueError("bands * rows must equal num_hashes")
        if self.max_bucket_size < 1:
            raise ValueError("max_bucket_size must be >= 1")


@dataclass
class MinHashSignature:
    uri: str
    values: np.ndarray
    empty: bool = False


@dataclass
class Bucket:
    bucket_id: str
    entity_type: str
    members: list


def _splitmix64_scalar(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def hash_seeds(num_hashes: int, seed: int) -> np.ndarray:
    out = []
    state = seed & MASK64
    for _ in range(num_hashes):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        out.append(_splitmix64_scalar(state))
    return np.array(out, dtype=np.uint64)


def base_hash(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def signature(keys, params: LshParams = LshParams(), uri: str = "", seeds=None) -> MinHashSignature:
    """MinHash over a set of feature keys (weights are ignored).

    An empty key set yields an all-maxima signature flagged ``empty``.
    """
    keys = sorted(set(keys))
    if not keys:
        return MinHashSignature(uri, np.full(params.num_hashes, SENTINEL, dtype=np.uint64), empty=True)
    if seeds is None:
        seeds = hash_seeds(params.num_hashes, params.seed)
    base = np.array([base_hash(k) for k in keys], dtype=np.uint64)
    hashed = _splitmix64(base[None, :] ^ seeds[:, None])
    return MinHashSignature(uri, hashed.min(axis=1))


def signatures(vectors, params: LshParams = LshParams()) -> list:
    seeds = hash_seeds(params.num_hashes, params.seed)
    return [signature(v.entries.keys(), params, v.uri, seeds) for v in vectors]


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins so components are labelled deterministically
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _components(sigs, bands: int, rows: int) -> list:
    uf = _UnionFind(len(sigs))
    for b in range(bands):
        seen = {}
        lo, hi = b * rows, (b + 1) * rows
        for i, sig in enumerate(sigs):
            if sig.empty:
                continue
            key = sig.values[lo:hi].tobytes()
            j = seen.setdefault(key, i)
            if j != i:
                uf.union(j, i)
    groups = defaultdict(list)
    for i in range(len(sigs)):
        groups[uf.find(i)].append(sigs[i])
    return list(groups.values())


def _split_oversized(group, params: LshParams, rows: int) -> list:
    if len(group) <= params.max_bucket_size:
        return [group]
    rows += 1
    bands = params.num_hashes // rows
    if bands < 1:
        # cannot tighten further; fall back to fixed-size chunks in uri order
        group = sorted(group, key=lambda s: s.uri)
        size = params.max_bucket_size
        return [group[i:i + size] for i in range(0, len(group), size)]
    out = []
    for sub in _components(group, bands, rows):
        out.extend(_split_oversized(sub, params, rows))
    return out


def bucket_entities(entity_type: str, sigs, params: LshParams = LshParams()) -> list:
    """Partition one type's entities into buckets.

    Oversized components are re-banded with one more row per band until they
    fit ``max_bucket_size``. Bucket ids are ``b00000``... ordered by each
    bucket's smallest uri.
    """
    sigs = sorted(sigs, key=lambda s: s.uri)
    lengths = {len(s.values) for s in sigs}
    if len(lengths) > 1:
        raise ValueError("signatures differ in length")
    groups = []
    for comp in _components(sigs, params.bands, params.rows):
        groups.extend(_split_oversized(comp, params, params.rows))
    members = sorted(sorted(s.uri for s in g) for g in groups)
    return [Bucket(f"b{i:05d}", entity_type, m) for i, m in enumerate(members)]


def same_band_probability(s: float, rows: int, bands: int) -> float:
    """Probability that a pair with Jaccard ``s`` collides in at least one band."""
    return 1.0 - (1.0 - s ** rows) ** bands


def buckets_path(directory, type_hash: str) -> Path:
    return Path(directory) / f"buckets-{type_hash}.tsv"


def write_buckets(buckets, path):
    rows = sorted((b.bucket_id, uri) for b in buckets for uri in b.members)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for bid, uri in rows:
            fh.write(f"{bid}\t{uri}\n")


def read_buckets(path, entity_type: str) -> list:
    groups = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            bid, uri = line.rstrip("\n").split("\t")
            groups[bid].append(uri)
    return [Bucket(bid, entity_type, sorted(groups[bid])) for bid in sorted(groups)]
