"""Base clusterers for the consensus: k-means, BIC-selected GMM, density-based."""
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import DBSCAN, KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture
from sklearn.neighbors import NearestNeighbors

COVARIANCE_TYPES = ("full", "diag", "tied", "spherical")
ELBOW_MIN_FRACTION = 0.25


def kmeans(points, k, seed=0, return_model=False):
    X = np.asarray(points, dtype=np.float64)
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the number of points {X.shape[0]}")
    if k < 1:
        raise ValueError("k must be positive")
    model = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed).fit(X)
    return (model.labels_, model) if return_model else model.labels_


@dataclass
class GmmFit:
    labels: np.ndarray
    n_components: int
    covariance_type: str
    bic: float
    converged: bool
    model: object = None


def gmm_fit(points, components=range(1, 7), covariance_types=COVARIANCE_TYPES, seed=0):
    """EM for every (components, covariance) pair; keep the lowest BIC."""
    X = np.asarray(points, dtype=np.float64)
    best = None
    for cov in covariance_types:
        if cov not in COVARIANCE_TYPES:
            raise ValueError(f"unknown covariance type {cov!r}")
        for m in components:
            if m > X.shape[0]:
                continue
            gm = GaussianMixture(n_components=m, covariance_type=cov, random_state=seed, max_iter=200)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gm.fit(X)
            bic = float(gm.bic(X))
            if best is None or bic < best.bic:
                best = GmmFit(gm.predict(X), m, cov, bic, bool(gm.converged_), gm)
    if best is None:
        raise ValueError("no admissible GMM configuration")
    return best


def density_cluster(points, min_cluster_size=2, min_samples=2, quantile=0.9):
    """DBSCAN with a data-driven radius; small clusters and noise go to the nearest centroid."""
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if n <= min_samples:
        return np.zeros(n, dtype=np.int64)
    dist, _ = NearestNeighbors(n_neighbors=min_samples + 1).fit(X).kneighbors(X)
    eps = float(np.quantile(dist[:, min_samples], quantile))
    if eps <= 0:
        eps = np.finfo(float).eps
    labels = DBSCAN(eps=eps, min_samples=min_samples).fit_predict(X)
    for c in np.unique(labels[labels >= 0]):
        if np.sum(labels == c) < min_cluster_size:
            labels[labels == c] = -1
    kept = np.unique(labels[labels >= 0])
    if kept.size == 0:
        return np.zeros(n, dtype=np.int64)
    cent = np.vstack([X[labels == c].mean(axis=0) for c in kept])
    noise = labels < 0
    if noise.any():
        d = ((X[noise][:, None, :] - cent[None, :, :]) ** 2).sum(-1)
        labels[noise] = kept[np.argmin(d, axis=1)]
    _, relabeled = np.unique(labels, return_inverse=True)
    return relabeled.astype(np.int64)


def inertia_curve(points, k_range, seed=0):
    X = np.asarray(points, dtype=np.float64)
    return np.array([kmeans(X, k, seed, return_model=True)[1].inertia_ for k in k_range])


def choose_k_inertia(points, k_range=range(1, 11), seed=0):
    """Elbow by largest second difference of the inertia curve.

    The elbow is accepted only when its second difference reaches a quarter of
    the first inertia value; otherwise the smallest k is returned.  Ties go to
    the smaller k.
    """
    X = np.asarray(points, dtype=np.float64)
    ks = [k for k in k_range if k <= X.shape[0]]
    if not ks:
        raise ValueError("empty k range")
    if len(ks) < 3:
        return ks[0]
    inertia = inertia_curve(X, ks, seed)
    second = inertia[:-2] - 2 * inertia[1:-1] + inertia[2:]
    j = int(np.argmax(second))
    if second[j] < ELBOW_MIN_FRACTION * inertia[0]:
        return ks[0]
    return ks[j + 1]
