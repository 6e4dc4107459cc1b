import math

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from entrex.bucketing import Bucket
from entrex.clustering import (SPECTRAL, XMEANS, KExceedsPoints, XMeansConfig, affinity_matrix, bic,
                               choose_k, cluster_bucket, eig_sym, kmeans, laplacian, read_cluster_map,
                               read_clusters, spectral, spectral_from_affinity, write_clusters, xmeans)
from entrex.features import FeatureVector


def blobs(seed, n_per=100, centers=((0, 0), (10, 0), (0, 10)), sigma=1.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(c, sigma, (n_per, len(c))) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per)
    return X, y


# equilateral, side 10 sigma: every pair of blobs equally far apart
TRIANGLE = ((0.0, 0.0), (10.0, 0.0), (5.0, 5.0 * math.sqrt(3)))


# --- k-means ----------------------------------------------------------------

def test_kmeans_two_pairs():
    res = kmeans([(0, 0), (0, 1), (10, 10), (10, 11)], 2, seed=0)
    assert res.labels[0] == res.labels[1] != res.labels[2] == res.labels[3]
    assert res.wcss == pytest.approx(1.0)


def test_kmeans_k_equals_n():
    pts = [(0, 0), (3, 1), (7, 2), (1, 9)]
    res = kmeans(pts, 4, seed=1)
    assert res.wcss == 0.0 and len(set(res.labels)) == 4


def test_kmeans_identical_points():
    res = kmeans([(2, 2)] * 5, 2, seed=0)
    assert res.wcss == 0.0
    assert len(set(res.labels)) == 1


def test_kmeans_k_exceeds():
    with pytest.raises(KExceedsPoints):
        kmeans([(0, 0)], 2)


@pytest.mark.parametrize("seed", range(20))
def test_wcss_non_increasing(seed):
    X, _ = blobs(seed, n_per=30, centers=((0, 0), (3, 0), (0, 3), (3, 3)), sigma=1.5)
    res = kmeans(X, 6, seed=seed)
    h = res.history
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_kmeans_restarts_never_worse():
    X, _ = blobs(5, n_per=10, centers=((0, 0), (4, 0), (0, 4), (4, 4)), sigma=1.2)
    single = kmeans(X, 4, seed=5)
    best = kmeans(X, 4, seed=5, n_init=8)
    assert best.wcss <= single.wcss


def test_kmeans_deterministic():
    X, _ = blobs(3)
    a, b = kmeans(X, 3, seed=9), kmeans(X, 3, seed=9)
    assert np.array_equal(a.labels, b.labels) and a.wcss == b.wcss


# --- BIC / x-means ----------------------------------------------------------

def test_bic_prefers_two_blobs():
    X, y = blobs(0, n_per=50, centers=((0, 0), (20, 0)))
    assert bic(X, y) > bic(X, np.zeros(len(X), dtype=int))


def test_bic_single_blob_prefers_one():
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (100, 2))
        split = kmeans(X, 2, seed=seed).labels
        wins += bic(X, np.zeros(100, dtype=int)) > bic(X, split)
    assert wins >= 90


def test_bic_degenerate():
    assert bic([(1, 1)] * 4, [0, 0, 0, 0]) == math.inf
    assert bic([(0, 0), (1, 1)], [0, 1]) == -math.inf


def test_xmeans_one_tight_blob_stays_at_kmin():
    rng = np.random.default_rng(4)
    X = rng.normal(0, 0.01, (60, 3))
    labels = xmeans(X, XMeansConfig(seed=4))
    assert len(set(labels)) <= 2


def test_xmeans_two_points():
    assert len(set(xmeans([(0, 0), (5, 5)]))) <= 2
    assert list(xmeans([(1, 1)])) == [0]


def test_xmeans_respects_kmax():
    X, _ = blobs(2, n_per=40, centers=[(10 * i, 0) for i in range(6)])
    labels = xmeans(X, XMeansConfig(k_min=2, k_max=4, seed=2))
    assert len(set(labels)) <= 4


def test_xmeans_config_validated():
    with pytest.raises(ValueError):
        XMeansConfig(k_min=1)
    with pytest.raises(ValueError):
        XMeansConfig(k_min=5, k_max=4)


# --- spectral ---------------------------------------------------------------

def test_affinity_kernel_values():
    A, flagged = affinity_matrix([(0.0,), (1.0,), (2.0,)])
    # pairwise distances 1, 2, 1 -> median 1
    assert not flagged
    assert A[0, 1] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert A[0, 2] == pytest.approx(math.exp(-2.0), abs=1e-12)
    assert np.all(np.diag(A) == 0)
    A, flagged = affinity_matrix([(3.0, 3.0)] * 3)
    assert flagged and np.array_equal(A, np.ones((3, 3)) - np.eye(3))
    # far beyond the median bandwidth the kernel vanishes
    A, _ = affinity_matrix([(0.0,), (1.0,), (1.5,), (2.0,), (1000.0,)])
    assert A[0, 4] < 1e-300


def test_laplacian_examples():
    assert np.array_equal(laplacian([[0, 1], [1, 0]]), [[1, -1], [-1, 1]])
    assert np.array_equal(laplacian(np.zeros((3, 3))), np.zeros((3, 3)))
    rng = np.random.default_rng(0)
    M = rng.random((30, 30))
    A = (M + M.T) / 2
    np.fill_diagonal(A, 0)
    assert np.abs(laplacian(A).sum(axis=1)).max() <= 1e-9


def test_eig_sym_examples():
    dec = eig_sym([[1, -1], [-1, 1]])
    assert dec.eigenvalues == pytest.approx([0, 2], abs=1e-12)
    assert dec.eigenvectors[:, 0] == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-12)
    assert np.allclose(eig_sym(np.zeros((4, 4))).eigenvalues, 0)


@pytest.mark.parametrize("seed", range(10))
def test_eig_sym_random(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(20, 20))
    L = (M + M.T) / 2
    dec = eig_sym(L)
    V, w = dec.eigenvectors, dec.eigenvalues
    assert np.all(np.diff(w) >= 0)
    assert np.abs(V @ np.diag(w) @ V.T - L).max() <= 1e-8
    assert np.abs(np.linalg.norm(V, axis=0) - 1).max() <= 1e-10
    for j in range(20):
        first = V[np.flatnonzero(np.abs(V[:, j]) > 1e-12)[0], j]
        assert first > 0


def test_eig_sym_size_cap():
    with pytest.raises(ValueError):
        eig_sym(np.eye(5), max_n=4)


@pytest.mark.parametrize("values,k", [
    ([0, 0.01, 0.02, 1.5, 1.6], 3),
    ([0, 0, 0, 2, 2.1, 2.2], 3),
    ([0, 1, 2, 3, 4, 5], 2),
])
def test_choose_k(values, k):
    assert choose_k(values) == k


def test_choose_k_bounded_by_kmax():
    assert choose_k([0, 0, 0, 0, 0, 9], k_max=3) <= 3


def test_two_block_affinity():
    A = np.zeros((10, 10))
    A[:5, :5] = 1
    A[5:, 5:] = 1
    np.fill_diagonal(A, 0)
    labels = spectral_from_affinity(A, seed=0)
    assert adjusted_rand_score([0] * 5 + [1] * 5, labels) == 1.0


def test_spectral_blobs():
    good = 0
    for seed in range(100):
        X, y = blobs(seed, n_per=20, centers=TRIANGLE)
        good += adjusted_rand_score(y, spectral(X, seed=seed)) >= 0.9
    assert good >= 95


def test_laplacian_psd_on_kernel():
    X, _ = blobs(1, n_per=15)
    A, _ = affinity_matrix(X)
    assert eig_sym(laplacian(A)).eigenvalues.min() >= -1e-8


def test_spectral_identical_points():
    assert len(set(spectral(np.ones((6, 3))))) == 1


# --- bucket driver and files -----------------------------------------------

def _bucket_vectors():
    vecs = {}
    for i in range(12):
        group = i // 6
        keys = {f"g{group}k{j}": 1.0 for j in range(5)}
        keys[f"own{i}"] = 0.1
        vecs[f"http://ex/e{i:02d}"] = FeatureVector(f"http://ex/e{i:02d}", keys)
    return vecs


@pytest.mark.parametrize("algo", [XMEANS, SPECTRAL])
def test_cluster_bucket_partitions(algo):
    vecs = _bucket_vectors()
    bucket = Bucket("b00000", "http://ex/T", sorted(vecs))
    records = cluster_bucket(bucket, vecs, algo, seed=3)
    members = [u for r in records for u in r.members]
    assert sorted(members) == sorted(vecs)
    assert all(r.algorithm == algo and r.bucket_id == "b00000" for r in records)
    again = cluster_bucket(bucket, vecs, algo, seed=3)
    assert [r.members for r in again] == [r.members for r in records]


def test_small_bucket_single_cluster():
    vecs = {"a": FeatureVector("a", {"x": 1.0}), "b": FeatureVector("b", {"y": 1.0})}
    records = cluster_bucket(Bucket("b00001", "T", ["a", "b"]), vecs, XMEANS)
    assert len(records) == 1 and records[0].members == ["a", "b"]


def test_cluster_files_round_trip(tmp_path):
    vecs = _bucket_vectors()
    records = cluster_bucket(Bucket("b00000", "http://ex/T,with,commas", sorted(vecs)), vecs, SPECTRAL)
    write_clusters(records, tmp_path, SPECTRAL)
    back = read_clusters(tmp_path, SPECTRAL)
    assert {c: r.members for c, r in back.items()} == {r.cluster_id: r.members for r in records}
    cmap = read_cluster_map(tmp_path, SPECTRAL)
    for r in records:
        for u in r.members:
            assert cmap[u] == [r.cluster_id]


def test_dense_path_matches_sparse_distance():
    from scipy.spatial.distance import pdist, squareform

    from entrex.clustering import densify
    from entrex.features import distance
    vecs = list(_bucket_vectors().values())
    D = squareform(pdist(densify(vecs)))
    for i, a in enumerate(vecs):
        for j, b in enumerate(vecs):
            assert D[i, j] == pytest.approx(distance(a, b), abs=1e-12)
