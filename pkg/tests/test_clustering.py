import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from cfgdrift.clustering import (
    ConsensusMatrix,
    calinski_harabasz,
    choose_k_inertia,
    consensus_cluster,
    consensus_update,
    davies_bouldin,
    decode,
    density_cluster,
    gmm_fit,
    kmeans,
    silhouette,
    train_gae,
)
from cfgdrift.clustering.consensus import solution_weight
from cfgdrift.clustering.gae import reconstruction_target
from cfgdrift.features import AttributedGraph

CENTRES = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 8.66]])


def blobs(n_per=50, seed=0, centres=CENTRES, std=1.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([c + std * rng.normal(size=(n_per, centres.shape[1])) for c in centres])
    return X, np.repeat(np.arange(len(centres)), n_per)


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def brute_silhouette(X, y):
    n = len(X)
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if y[j] == y[i] and j != i]
        if not own:
            continue
        a = sum(dist(X[i], X[j]) for j in own) / len(own)
        b = min(
            sum(dist(X[i], X[j]) for j in range(n) if y[j] == c) / sum(1 for j in range(n) if y[j] == c)
            for c in set(y) if c != y[i]
        )
        total += 0.0 if max(a, b) == 0 else (b - a) / max(a, b)
    return total / n


def brute_ch(X, y):
    labels = sorted(set(y))
    n, k = len(X), len(labels)
    mean = [sum(col) / n for col in zip(*X)]
    B = W = 0.0
    for c in labels:
        pts = [X[i] for i in range(n) if y[i] == c]
        cen = [sum(col) / len(pts) for col in zip(*pts)]
        B += len(pts) * dist(cen, mean) ** 2
        W += sum(dist(p, cen) ** 2 for p in pts)
    return (B / (k - 1)) / (W / (n - k))


def brute_db(X, y):
    labels = sorted(set(y))
    cen, spread = {}, {}
    for c in labels:
        pts = [X[i] for i in range(len(X)) if y[i] == c]
        cen[c] = [sum(col) / len(pts) for col in zip(*pts)]
        spread[c] = sum(dist(p, cen[c]) for p in pts) / len(pts)
    return sum(
        max((spread[a] + spread[b]) / dist(cen[a], cen[b]) for b in labels if b != a) for a in labels
    ) / len(labels)


@pytest.mark.parametrize("seed", range(5))
def test_indices_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 120))
    X = rng.normal(size=(n, int(rng.integers(1, 5))))
    y = rng.integers(0, int(rng.integers(2, 6)), n)
    y[:2] = [0, 1]
    Xl, yl = X.tolist(), y.tolist()
    assert silhouette(X, y) == pytest.approx(brute_silhouette(Xl, yl), abs=1e-9)
    assert calinski_harabasz(X, y) == pytest.approx(brute_ch(Xl, yl), rel=1e-9)
    assert davies_bouldin(X, y) == pytest.approx(brute_db(Xl, yl), rel=1e-9)


def test_silhouette_examples():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]])
    assert silhouette(X, [0, 0, 1, 1]) > 0.9
    assert silhouette(X, [0, 1, 0, 1]) < 0
    assert silhouette(np.zeros((4, 2)), [0, 0, 1, 1]) == 0.0
    assert silhouette(X, [0, 0, 0, 0]) == 0.0


def test_ch_db_examples_and_errors():
    X, y = blobs(20, centres=np.array([[0.0, 0.0], [100.0, 0.0]]), std=0.1)
    assert calinski_harabasz(X, y) > 1e5
    assert davies_bouldin(X, y) < 0.01
    with pytest.raises(ValueError):
        calinski_harabasz(X, np.zeros(len(X)))
    with pytest.raises(ValueError):
        davies_bouldin(X, np.zeros(len(X)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(6, 40))
def test_silhouette_range(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = rng.integers(0, 3, n)
    s = silhouette(X, y)
    assert -1.0 <= s <= 1.0


# ---------------------------------------------------------------------------
# predictors
# ---------------------------------------------------------------------------

def test_kmeans_blobs_and_k1():
    X, y = blobs()
    assert adjusted_rand_score(y, kmeans(X, 3, seed=0)) == 1.0
    _, model = kmeans(X, 1, return_model=True)
    assert np.allclose(model.cluster_centers_[0], X.mean(0))
    with pytest.raises(ValueError):
        kmeans(X[:2], 3)
    assert np.array_equal(kmeans(X, 3, seed=4), kmeans(X, 3, seed=4))


def test_gmm_bic_two_blobs():
    X, _ = blobs(60, centres=np.array([[0.0, 0.0], [12.0, 3.0]]))
    fit = gmm_fit(X, seed=0)
    assert fit.n_components == 2 and fit.converged
    assert fit.covariance_type in ("full", "diag", "tied", "spherical")


def test_density_cluster_blobs():
    X, y = blobs(40, std=0.6)
    labels = density_cluster(X)
    assert labels.min() == 0 and np.all(np.bincount(labels) >= 2)
    assert adjusted_rand_score(y, labels) > 0.9


def test_choose_k():
    X, _ = blobs()
    assert choose_k_inertia(X, range(1, 9)) == 3
    rng = np.random.default_rng(0)
    assert choose_k_inertia(rng.normal(size=(80, 2)), range(2, 9)) == 2
    line = np.linspace(0, 1, 40)[:, None]
    assert choose_k_inertia(line, range(3, 9)) == 3


# ---------------------------------------------------------------------------
# consensus
# ---------------------------------------------------------------------------

def test_solution_weight_exact():
    assert solution_weight(1.0) == 1.0
    assert solution_weight(-1.0) == 0.0
    assert solution_weight(0.0) == 0.5


def test_consensus_matrix_properties():
    cm = ConsensusMatrix(5)
    consensus_update(cm, [0, 0, 1, 1, 2], 1.0)
    consensus_update(cm, [0, 1, 1, 1, 0], 0.0)
    M = cm.cm
    assert np.array_equal(M, M.T)
    assert np.all(np.diag(M) >= M.max(axis=1))
    N = cm.normalized()
    assert N.min() >= 0 and N.max() <= 1 and N[0, 0] == 1.0
    assert N[2, 3] == 1.0
    with pytest.raises(ValueError):
        cm.update([0, 1], 0.5)


def test_identical_solutions_normalize_like_one():
    a, b = ConsensusMatrix(4), ConsensusMatrix(4)
    a.update([0, 0, 1, 1], 0.4)
    b.update([0, 0, 1, 1], 0.4).update([0, 0, 1, 1], 0.4)
    assert np.allclose(a.normalized(), b.normalized())


def test_consensus_single_predictor_reproduces_partition():
    X, y = blobs()
    res = consensus_cluster(X, ["kmeans"], seed=0)
    assert adjusted_rand_score(res.solutions["kmeans"][0], res.assignment.labels) == 1.0
    assert adjusted_rand_score(y, res.assignment.labels) == 1.0


def test_consensus_with_original_labels_and_errors():
    X, y = blobs(30)
    res = consensus_cluster(X, ["kmeans", "gmm"], original_labels=y, seed=1)
    assert "original" in res.solutions and res.matrix.solution_count == 3
    assert -1 <= res.assignment.silhouette <= 1
    with pytest.raises(ValueError):
        consensus_cluster(X, [])
    with pytest.raises(ValueError):
        consensus_cluster(X, ["hdbscan"])


# ---------------------------------------------------------------------------
# graph autoencoder
# ---------------------------------------------------------------------------

def rand_graph(rng, n, m=4):
    return AttributedGraph(rng.normal(size=(n, m)), (rng.random((n, n)) < 0.3).astype(int), np.ones(1))


def test_gae_loss_decreases_and_range():
    rng = np.random.default_rng(0)
    g = rand_graph(rng, 10)
    res = train_gae(g, epochs=60, hidden=16, d_z=16)
    assert res.losses[-1] < res.losses[0]
    assert len(res.losses) == 61 and res.vector.shape == (16,)
    A = decode(res.Z)
    assert np.all((A > 0) & (A < 1))
    huge = decode(np.full((3, 2), 100.0))
    assert np.all((huge > 0) & (huge < 1))


def test_gae_deterministic_and_single_node():
    rng = np.random.default_rng(1)
    g = rand_graph(rng, 7)
    h = AttributedGraph(g.X.copy(), g.A.copy(), g.Y)
    assert np.array_equal(train_gae(g, 20, d_z=8).vector, train_gae(h, 20, d_z=8).vector)
    one = AttributedGraph(rng.normal(size=(1, 4)), np.zeros((1, 1), dtype=int), np.ones(1))
    res = train_gae(one, 10, d_z=8)
    assert np.all(np.isfinite(res.vector))


def test_reconstruction_target():
    A = np.array([[0, 2, 0], [0, 0, 0], [1, 0, 0]])
    assert reconstruction_target(A).tolist() == [[1, 1, 1], [1, 1, 0], [1, 0, 1]]


def test_gae_sampled_pairs_for_large_graph(monkeypatch):
    import sys

    gae = sys.modules["cfgdrift.clustering.gae"]
    monkeypatch.setattr(gae, "NEG_SAMPLE_THRESHOLD", 5)
    rng = np.random.default_rng(2)
    res = train_gae(rand_graph(rng, 12), 5, hidden=8, d_z=8)
    assert len(res.losses) == 6 and all(np.isfinite(res.losses))
