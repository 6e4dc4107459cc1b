"""k-means, x-means and spectral clustering of bucketed entities.

Both algorithms work on dense arrays; :func:`densify` projects a bucket's
sparse feature vectors onto the union of their feature ids, which keeps the
Euclidean geometry of the sparse distance exactly.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .features import type_hash

log = logging.getLogger(__name__)

XMEANS, SPECTRAL = "xmeans", "spectral"
ALGORITHMS = (XMEANS, SPECTRAL)


class KExceedsPoints(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class XMeansConfig:
    k_min: int = 2
    k_max: int = 50
    max_iter: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.k_min <= self.k_max:
            raise ValueError("need 2 <= k_min <= k_max")


@dataclass
class ClusterRecord:
    cluster_id: str
    entity_type: str
    bucket_id: str
    algorithm: str
    members: list


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    wcss: float
    history: list = field(default_factory=list)
    n_iter: int = 0


@dataclass
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def densify(vectors) -> np.ndarray:
    features = sorted({f for v in vectors for f in v.entries})
    col = {f: j for j, f in enumerate(features)}
    X = np.zeros((len(vectors), max(len(features), 1)))
    for i, v in enumerate(vectors):
        for f, w in v.entries.items():
            X[i, col[f]] = w
    return X


def derive_seed(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


# k-means++ restarts in the spectral embedding; one unlucky seeding can merge
# two well-separated groups there
SPECTRAL_RESTARTS = 10


# --- k-means --------------------------------------------------------------

def _sq_dists(X, C):
    return cdist(X, C, "sqeuclidean")


def kmeans_pp_init(X, k, rng) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def kmeans(points, k, seed=0, max_iter=100, tol=1e-6, init=None, n_init=1) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding.

    With ``n_init`` > 1 the seeding is repeated from seeds derived from
    ``seed`` and the run with the lowest WCSS wins (first on ties).

    Empty clusters are re-seeded on the point farthest from its centroid.
    ``history`` holds the within-cluster sum of squares after every
    iteration. Labels are renumbered 0..m-1 in order of first appearance,
    so fewer than ``k`` labels can come back for degenerate input.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if k > n:
        raise KExceedsPoints(f"k={k} exceeds {n} points")
    if n_init > 1 and init is None:
        runs = [kmeans(X, k, derive_seed(seed, r) if r else seed, max_iter, tol) for r in range(n_init)]
        return min(runs, key=lambda res: res.wcss)
    rng = np.random.default_rng(seed)
    C = np.array(init, dtype=float) if init is not None else kmeans_pp_init(X, k, rng)
    history = []
    labels = np.zeros(n, dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, C)
        labels = D.argmin(axis=1)
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = D[np.arange(n), labels]
            i = int(far.argmax())
            if far[i] <= 0:
                continue
            C[j] = X[i]
            D[:, j] = ((X - C[j]) ** 2).sum(axis=1)
            labels = D.argmin(axis=1)
        newC = C.copy()
        for j in range(k):
            mask = labels == j
            if mask.any():
                newC[j] = X[mask].mean(axis=0)
        shift = np.sqrt(((newC - C) ** 2).sum(axis=1)).max()
        C = newC
        history.append(float(((X - C[labels]) ** 2).sum()))
        if shift < tol:
            break
    # final assignment against the converged centroids
    labels = _sq_dists(X, C).argmin(axis=1)
    used, labels = np.unique(labels, return_inverse=True)
    C = C[used]
    wcss = float(((X - C[labels]) ** 2).sum())
    order = _first_appearance(labels)
    return KMeansResult(order[labels], C[np.argsort(order)], wcss, history, it)


def _first_appearance(labels) -> np.ndarray:
    mapping = {}
    for lab in labels:
        mapping.setdefault(int(lab), len(mapping))
    out = np.zeros(len(mapping), dtype=int)
    for old, new in mapping.items():
        out[old] = new
    return out


# --- BIC / x-means ----------------------------------------------------------

def effective_dimension(X) -> int:
    X = np.asarray(X, dtype=float)
    return max(int(np.count_nonzero(np.ptp(X, axis=0) > 0)), 1)


def bic(points, labels, d=None) -> float:
    """BIC of a hard assignment under identical spherical Gaussians.

    loglik follows the x-means formulation with the pooled variance
    ``sum ||x - c||^2 / (n - k)``; penalty is ``k (d + 1) / 2 * ln n``.
    Returns +inf for zero distortion and -inf when n <= k.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels)
    n = len(X)
    ks = np.unique(labels)
    k = len(ks)
    if d is None:
        d = effective_dimension(X)
    if n <= k:
        return -math.inf
    sse = 0.0
    sizes = []
    for lab in ks:
        members = X[labels == lab]
        sse += float(((members - members.mean(axis=0)) ** 2).sum())
        sizes.append(len(members))
    var = sse / (n - k)
    if var <= 0:
        return math.inf
    loglik = 0.0
    for nj in sizes:
        loglik += (nj * math.log(nj) - nj * math.log(n)
                   - nj / 2.0 * math.log(2 * math.pi)
                   - nj * d / 2.0 * math.log(var)
                   - (nj - k) / 2.0)
    params = k * (d + 1)
    return loglik - params / 2.0 * math.log(n)


def xmeans(points, config: XMeansConfig = XMeansConfig()) -> np.ndarray:
    """Grow k from ``k_min`` by BIC-tested local 2-means splits.

    Returns a label array. Stops once no split improves the local BIC or
    ``k_max`` clusters exist; after every round of splits the full set is
    re-fitted from the current centres.
    """
    X = np.asarray(points, dtype=float)
    n = len(X)
    if n < 2:
        return np.zeros(n, dtype=int)
    k0 = min(config.k_min, n)
    res = kmeans(X, k0, seed=config.seed, max_iter=config.max_iter, tol=config.tol)
    centers = res.centroids
    labels = res.labels
    round_no = 0
    while len(centers) < config.k_max and round_no < config.max_iter:
        round_no += 1
        new_centers = []
        for j in range(len(centers)):
            members = X[labels == j]
            # clusters if j is kept whole: done so far + j and everything after it
            if len(members) >= 3 and len(new_centers) + len(centers) - j + 1 <= config.k_max:
                child = kmeans(members, 2, seed=derive_seed(config.seed, round_no, j),
                               max_iter=config.max_iter, tol=config.tol)
                if len(child.centroids) == 2:
                    d = effective_dimension(members)
                    parent_bic = bic(members, np.zeros(len(members), dtype=int), d)
                    if bic(members, child.labels, d) > parent_bic:
                        new_centers.extend(child.centroids)
                        continue
            new_centers.append(centers[j])
        if len(new_centers) == len(centers):
            break
        res = kmeans(X, len(new_centers), max_iter=config.max_iter, tol=config.tol,
                     init=np.array(new_centers))
        centers, labels = res.centroids, res.labels
    return labels


# --- spectral ---------------------------------------------------------------

def affinity_matrix(X) -> tuple:
    """Gaussian-kernel affinity with median pairwise distance as bandwidth.

    Returns ``(A, flagged)``; ``flagged`` is True when every pairwise distance
    is zero and the graph is made fully connected.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n < 2:
        raise ValueError("affinity needs at least two points")
    dists = pdist(X)
    positive = dists[dists > 0]
    if positive.size == 0:
        A = np.ones((n, n)) - np.eye(n)
        return A, True
    sigma = float(np.median(dists))
    if sigma <= 0:
        sigma = float(np.median(positive))
    A = squareform(np.exp(-(dists ** 2) / (2.0 * sigma ** 2)))
    np.fill_diagonal(A, 0.0)
    return A, False


def laplacian(A) -> np.ndarray:
    """Unnormalised Laplacian D - A with D the degree (row-sum) matrix."""
    A = np.asarray(A, dtype=float)
    return np.diag(A.sum(axis=1)) - A


def eig_sym(L, max_n: int = 2000) -> EigenDecomposition:
    """Full symmetric eigendecomposition, eigenvalues ascending.

    Each eigenvector is sign-fixed so its first non-negligible component is
    positive.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if n > max_n:
        raise ValueError(f"matrix of size {n} exceeds the configured maximum {max_n}")
    try:
        w, V = np.linalg.eigh((L + L.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            V[:, j] = -col
    return EigenDecomposition(w, V)


def choose_k(eigenvalues, k_max: int = 50) -> int:
    """Largest eigengap over positions 2..min(n-1, k_max), 1-based.

    Position i compares eigenvalue i+1 with eigenvalue i; ties go to the
    smallest i.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n = len(lam)
    if n < 3:
        raise ValueError("need at least three eigenvalues")
    hi = min(n - 1, k_max)
    best_i, best_gap = 2, -math.inf
    for i in range(2, hi + 1):
        gap = lam[i] - lam[i - 1]
        if gap > best_gap:
            best_i, best_gap = i, gap
    return best_i


def spectral_from_affinity(A, seed=0, k_max=50, max_n=2000, max_iter=100, tol=1e-6,
                           n_init=SPECTRAL_RESTARTS) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    n = len(A)
    if n < 3:
        return np.zeros(n, dtype=int)
    dec = eig_sym(laplacian(A), max_n=max_n)
    k = choose_k(dec.eigenvalues, k_max)
    embedding = dec.eigenvectors[:, :k]
    return kmeans(embedding, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init).labels


def spectral(X, seed=0, k_max=50, max_n=2000, max_iter=100, tol=1e-6) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = len(X)
    if n < 3:
        return np.zeros(n, dtype=int)
    A, flagged = affinity_matrix(X)
    if flagged:
        log.debug("all %d points coincide; emitting a single cluster", n)
        return np.zeros(n, dtype=int)
    return spectral_from_affinity(A, seed, k_max, max_n, max_iter, tol)


# --- bucket-level driver ------------------------------------------------------

def cluster_bucket(bucket, vectors_by_uri, algorithm, config: XMeansConfig = XMeansConfig(),
                   seed=0, spectral_k_max=50, max_n=2000) -> list:
    members = sorted(bucket.members)
    prefix = f"{algorithm}:{type_hash(bucket.entity_type)}:{bucket.bucket_id}"
    if len(members) < 3:
        return [ClusterRecord(f"{prefix}:0", bucket.entity_type, bucket.bucket_id, algorithm, members)]
    X = densify([vectors_by_uri[u] for u in members])
    task_seed = derive_seed(seed, algorithm, bucket.entity_type, bucket.bucket_id)
    if algorithm == XMEANS:
        cfg = XMeansConfig(config.k_min, config.k_max, config.max_iter, config.tol, task_seed)
        labels = xmeans(X, cfg)
    elif algorithm == SPECTRAL:
        labels = spectral(X, task_seed, spectral_k_max, max_n, config.max_iter, config.tol)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    groups = {}
    for uri, lab in zip(members, labels):
        groups.setdefault(int(lab), []).append(uri)
    ordered = sorted(groups.values())
    return [ClusterRecord(f"{prefix}:{i}", bucket.entity_type, bucket.bucket_id, algorithm, g)
            for i, g in enumerate(ordered)]


def clusters_path(directory, algorithm) -> Path:
    return Path(directory) / f"clusters-{algorithm}.tsv"


def cluster_map_path(directory, algorithm) -> Path:
    return Path(directory) / f"clustermap-{algorithm}.tsv"


def write_clusters(records, directory, algorithm):
    """``clusters-<algo>.tsv`` rows plus the ``clustermap-<algo>.tsv`` inverse map."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = sorted((r.cluster_id, r.entity_type, r.bucket_id, u) for r in records for u in r.members)
    with open(clusters_path(directory, algorithm), "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")
    inverse = {}
    for r in records:
        for u in r.members:
            inverse.setdefault(u, []).append(r.cluster_id)
    with open(cluster_map_path(directory, algorithm), "w", encoding="utf-8", newline="\n") as fh:
        for uri in sorted(inverse):
            fh.write(uri + "\t" + ",".join(sorted(inverse[uri])) + "\n")


def read_clusters(directory, algorithm) -> dict:
    """cluster_id -> ClusterRecord."""
    records = {}
    with open(clusters_path(directory, algorithm), encoding="utf-8") as fh:
        for line in fh:
            cid, etype, bid, uri = line.rstrip("\n").split("\t")
            rec = records.get(cid)
            if rec is None:
                rec = records[cid] = ClusterRecord(cid, etype, bid, algorithm, [])
            rec.members.append(uri)
    return records


def read_cluster_map(directory, algorithm) -> dict:
    out = {}
    with open(cluster_map_path(directory, algorithm), encoding="utf-8") as fh:
        for line in fh:
            uri, ids = line.rstrip("\n").split("\t")
            out[uri] = ids.split(",")
    return out
