"""Cluster-validity indices: silhouette, Calinski-Harabasz, Davies-Bouldin."""
import numpy as np

from .. import kernels


def _encode(labels):
    uniq, inv = np.unique(np.asarray(labels), return_inverse=True)
    return inv.astype(np.int64), len(uniq)


def silhouette_samples(points, labels):
    X = np.ascontiguousarray(points, dtype=np.float64)
    lab, k = _encode(labels)
    n = X.shape[0]
    if k < 2:
        return np.zeros(n)
    D = kernels.pairwise_dist_exact(X)
    S = kernels.label_distance_sums(D, lab, k)
    counts = np.bincount(lab, minlength=k).astype(np.float64)
    own = counts[lab]
    a = np.divide(S[np.arange(n), lab], own - 1, out=np.zeros(n), where=own > 1)
    mean_other = S / counts[None, :]
    mean_other[np.arange(n), lab] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros(n), where=denom > 0)
    # singleton clusters contribute zero
    s[own == 1] = 0.0
    return s


def silhouette(points, labels):
    """Mean silhouette; a single-cluster labelling scores 0."""
    return float(silhouette_samples(points, labels).mean())


def _check_k(k, n):
    if k < 2:
        raise ValueError("index needs at least two clusters")
    if k >= n + 1:
        raise ValueError("more clusters than points")


def calinski_harabasz(points, labels):
    X = np.asarray(points, dtype=np.float64)
    lab, k = _encode(labels)
    n = X.shape[0]
    _check_k(k, n)
    mean = X.mean(axis=0)
    between = within = 0.0
    for c in range(k):
        Xc = X[lab == c]
        mc = Xc.mean(axis=0)
        between += len(Xc) * np.sum((mc - mean) ** 2)
        within += np.sum((Xc - mc) ** 2)
    if n == k:
        raise ValueError("Calinski-Harabasz needs more points than clusters")
    if within == 0.0:
        return np.inf if between > 0 else 0.0
    return float(between * (n - k) / (within * (k - 1)))


def davies_bouldin(points, labels):
    X = np.asarray(points, dtype=np.float64)
    lab, k = _encode(labels)
    _check_k(k, X.shape[0])
    cent = np.vstack([X[lab == c].mean(axis=0) for c in range(k)])
    scatter = np.array([np.sqrt(((X[lab == c] - cent[c]) ** 2).sum(axis=1)).mean() for c in range(k)])
    M = np.sqrt(((cent[:, None, :] - cent[None, :, :]) ** 2).sum(-1))
    num = scatter[:, None] + scatter[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(M > 0, num / np.where(M > 0, M, 1.0), np.where(num > 0, np.inf, 0.0))
    np.fill_diagonal(R, -np.inf)
    return float(R.max(axis=1).mean())


def all_indices(points, labels):
    return {
        "silhouette": silhouette(points, labels),
        "calinski_harabasz": calinski_harabasz(points, labels),
        "davies_bouldin": davies_bouldin(points, labels),
    }
