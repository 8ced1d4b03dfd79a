"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba variants are used when numba imports cleanly and the environment
variable ``CFGDRIFT_DISABLE_NUMBA`` is unset (or ``0``).  Both variants are
always importable under their suffixed names so the benchmark and the tests
can compare them directly.
"""
import os

import numpy as np

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _numba_requested():
    flag = os.environ.get("CFGDRIFT_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


USE_NUMBA = numba is not None and _numba_requested()


# ---------------------------------------------------------------------------
# COO sparse-dense product: out[rows[k]] += vals[k] * H[cols[k]]
# ---------------------------------------------------------------------------

def coo_matmul_numpy(rows, cols, vals, H, n_out):
    out = np.zeros((n_out, H.shape[1]), dtype=H.dtype)
    if rows.size:
        np.add.at(out, rows, vals[:, None] * H[cols])
    return out


# ---------------------------------------------------------------------------
# contiguous segment sums: out[g] = sum(H[offsets[g]:offsets[g+1]])
# ---------------------------------------------------------------------------

def segment_sum_numpy(H, offsets):
    n_seg = offsets.shape[0] - 1
    if H.shape[0] == 0:
        return np.zeros((n_seg, H.shape[1]), dtype=H.dtype)
    out = np.add.reduceat(H, offsets[:-1], axis=0)
    # reduceat returns H[i] for empty segments instead of zeros
    empty = offsets[1:] == offsets[:-1]
    if empty.any():
        out[empty] = 0.0
    return out


# ---------------------------------------------------------------------------
# pairwise euclidean distances
# ---------------------------------------------------------------------------

def pairwise_sqdist_numpy(X, Y):
    xx = np.einsum("ij,ij->i", X, X)[:, None]
    yy = np.einsum("ij,ij->i", Y, Y)[None, :]
    d = xx + yy - 2.0 * (X @ Y.T)
    np.maximum(d, 0.0, out=d)
    return d


def pairwise_dist_exact_numpy(X):
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


# ---------------------------------------------------------------------------
# per-label distance sums: S[i, c] = sum_{j : labels[j] == c} D[i, j]
# ---------------------------------------------------------------------------

def label_distance_sums_numpy(D, labels, n_labels):
    onehot = np.zeros((labels.shape[0], n_labels))
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    return D @ onehot


# ---------------------------------------------------------------------------
# SMO for the one-class dual in libsvm scaling
#   min 0.5 a^T Q a   s.t.  0 <= a_i <= 1,  sum a = total
# Working-set selection uses second-order information (Fan, Chen, Lin 2005).
# Returns (alpha, gradient, kkt_gap, iterations).
# ---------------------------------------------------------------------------

_TAU = 1e-12


def _smo_init(n, total):
    alpha = np.zeros(n)
    n_full = int(np.floor(total))
    alpha[:n_full] = 1.0
    if n_full < n:
        alpha[n_full] = total - n_full
    return alpha


def smo_one_class_numpy(Q, total, eps, max_iter):
    n = Q.shape[0]
    alpha = _smo_init(n, total)
    G = Q @ alpha
    diag = np.diag(Q).copy()
    gap = np.inf
    it = 0
    while it < max_iter:
        # i: most violating index that can increase, j: that can decrease
        up = alpha < 1.0
        low = alpha > 0.0
        mG = -G
        cand = np.where(up, mG, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        low_vals = np.where(low, mG, np.inf)
        gmin = low_vals.min()
        gap = gmax - gmin
        if gap < eps:
            break
        b = gmax + G
        a = diag[i] + diag - 2.0 * Q[i]
        a = np.where(a > 0, a, _TAU)
        score = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            break
        quad = diag[i] + diag[j] - 2.0 * Q[i, j]
        if quad <= 0:
            quad = _TAU
        delta = (G[j] - G[i]) / quad
        s = alpha[i] + alpha[j]
        ai = alpha[i] + delta
        aj = alpha[j] - delta
        if ai > 1.0:
            ai = 1.0
            aj = s - 1.0
        if aj < 0.0:
            aj = 0.0
            ai = s
        if ai < 0.0:
            ai = 0.0
            aj = s
        if aj > 1.0:
            aj = 1.0
            ai = s - 1.0
        di = ai - alpha[i]
        dj = aj - alpha[j]
        alpha[i] = ai
        alpha[j] = aj
        G += Q[i] * di + Q[j] * dj
        it += 1
    return alpha, G, gap, it


# ---------------------------------------------------------------------------
# fused Adam update, in place on flat views of p, m, v
# ---------------------------------------------------------------------------

def adam_update_numpy(p, g, m, v, lr, b1, b2, c1, c2, eps):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    denom = np.sqrt(v / c2)
    denom += eps
    p -= (lr / c1) * m / denom


if numba is not None:

    @njit(cache=True)
    def adam_update_numba(p, g, m, v, lr, b1, b2, c1, c2, eps):
        step = lr / c1
        for i in range(p.shape[0]):
            gi = g[i]
            mi = b1 * m[i] + (1.0 - b1) * gi
            vi = b2 * v[i] + (1.0 - b2) * (gi * gi)
            m[i] = mi
            v[i] = vi
            p[i] -= step * mi / (np.sqrt(vi / c2) + eps)

    @njit(cache=True)
    def coo_matmul_numba(rows, cols, vals, H, n_out):
        out = np.zeros((n_out, H.shape[1]), dtype=H.dtype)
        h = H.shape[1]
        for k in range(rows.shape[0]):
            r = rows[k]
            c = cols[k]
            v = vals[k]
            for t in range(h):
                out[r, t] += v * H[c, t]
        return out

    @njit(cache=True)
    def segment_sum_numba(H, offsets):
        n_seg = offsets.shape[0] - 1
        h = H.shape[1]
        out = np.zeros((n_seg, h), dtype=H.dtype)
        for g in range(n_seg):
            for i in range(offsets[g], offsets[g + 1]):
                for t in range(h):
                    out[g, t] += H[i, t]
        return out

    @njit(cache=True)
    def pairwise_sqdist_numba(X, Y):
        n = X.shape[0]
        m = Y.shape[0]
        d = X.shape[1]
        out = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = X[i, k] - Y[j, k]
                    acc += diff * diff
                out[i, j] = acc
        return out

    @njit(cache=True)
    def pairwise_dist_exact_numba(X):
        n = X.shape[0]
        d = X.shape[1]
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    acc += diff * diff
                r = np.sqrt(acc)
                out[i, j] = r
                out[j, i] = r
        return out

    @njit(cache=True)
    def label_distance_sums_numba(D, labels, n_labels):
        n = D.shape[0]
        out = np.zeros((n, n_labels))
        for i in range(n):
            for j in range(n):
                out[i, labels[j]] += D[i, j]
        return out

    @njit(cache=True)
    def smo_one_class_numba(Q, total, eps, max_iter):
        n = Q.shape[0]
        alpha = np.zeros(n)
        n_full = int(np.floor(total))
        for k in range(min(n_full, n)):
            alpha[k] = 1.0
        if n_full < n:
            alpha[n_full] = total - n_full
        G = Q @ alpha
        gap = np.inf
        it = 0
        while it < max_iter:
            i = -1
            gmax = -np.inf
            gmin = np.inf
            for t in range(n):
                if alpha[t] < 1.0 and -G[t] > gmax:
                    gmax = -G[t]
                    i = t
                if alpha[t] > 0.0 and -G[t] < gmin:
                    gmin = -G[t]
            gap = gmax - gmin
            if gap < eps or i < 0:
                break
            j = -1
            best = np.inf
            for t in range(n):
                if alpha[t] > 0.0:
                    b = gmax + G[t]
                    if b > 0.0:
                        a = Q[i, i] + Q[t, t] - 2.0 * Q[i, t]
                        if a <= 0.0:
                            a = _TAU
                        score = -(b * b) / a
                        if score < best:
                            best = score
                            j = t
            if j < 0:
                break
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (G[j] - G[i]) / quad
            s = alpha[i] + alpha[j]
            ai = alpha[i] + delta
            aj = alpha[j] - delta
            if ai > 1.0:
                ai = 1.0
                aj = s - 1.0
            if aj < 0.0:
                aj = 0.0
                ai = s
            if ai < 0.0:
                ai = 0.0
                aj = s
            if aj > 1.0:
                aj = 1.0
                ai = s - 1.0
            di = ai - alpha[i]
            dj = aj - alpha[j]
            alpha[i] = ai
            alpha[j] = aj
            for t in range(n):
                G[t] += Q[i, t] * di + Q[j, t] * dj
            it += 1
        return alpha, G, gap, it


if USE_NUMBA:
    coo_matmul = coo_matmul_numba
    segment_sum = segment_sum_numba
    pairwise_sqdist = pairwise_sqdist_numba
    pairwise_dist_exact = pairwise_dist_exact_numba
    label_distance_sums = label_distance_sums_numba
    smo_one_class = smo_one_class_numba
    adam_update = adam_update_numba
else:
    coo_matmul = coo_matmul_numpy
    segment_sum = segment_sum_numpy
    pairwise_sqdist = pairwise_sqdist_numpy
    pairwise_dist_exact = pairwise_dist_exact_numpy
    label_distance_sums = label_distance_sums_numpy
    smo_one_class = smo_one_class_numpy
    adam_update = adam_update_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
