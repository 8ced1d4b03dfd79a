"""One-class SVM over latent vectors, unknown-class relabelling and open-set metrics."""
import json
from dataclasses import dataclass

import numpy as np

from . import kernels

UNKNOWN = "unknown"
INLIER, OUTLIER = 1, -1


@dataclass
class OcSvm:
    support: np.ndarray     # support vectors, one per row
    alpha: np.ndarray       # dual coefficients, summing to 1
    rho: float
    nu: float
    gamma: float
    kkt_gap: float = 0.0
    iterations: int = 0
    n_train: int = 0

    def to_dict(self):
        return {"support": self.support.tolist(), "alpha": self.alpha.tolist(), "rho": self.rho,
                "nu": self.nu, "gamma": self.gamma, "kkt_gap": self.kkt_gap,
                "iterations": self.iterations, "n_train": self.n_train}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["support"], dtype=np.float64).reshape(len(obj["alpha"]), -1),
                   np.asarray(obj["alpha"], dtype=np.float64), float(obj["rho"]), float(obj["nu"]),
                   float(obj["gamma"]), float(obj.get("kkt_gap", 0.0)), int(obj.get("iterations", 0)),
                   int(obj.get("n_train", 0)))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def rbf_kernel(X, Y, gamma):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    return np.exp(-gamma * kernels.pairwise_sqdist(X, Y))


def _rho(alpha, G):
    free = (alpha > 0.0) & (alpha < 1.0)
    if free.any():
        return float(G[free].mean())
    at_upper = alpha >= 1.0
    lb = G[at_upper].max() if at_upper.any() else -np.inf
    ub = G[~at_upper].min() if (~at_upper).any() else np.inf
    if not np.isfinite(lb):
        return float(ub)
    if not np.isfinite(ub):
        return float(lb)
    return float((ub + lb) / 2.0)


def ocsvm_train(latents, nu=0.1, gamma=None, tol=1e-4, max_iter=100_000):
    """Solve the nu-one-class dual with SMO and keep the support vectors.

    The solver works in the box 0 <= a_i <= 1 with sum(a) = nu * N; the result
    is divided by nu * N so the coefficients sum to one.
    """
    X = np.asarray(latents, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two training vectors")
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    n, d = X.shape
    gamma = 1.0 / d if gamma is None else float(gamma)
    Q = rbf_kernel(X, X, gamma)
    total = nu * n
    alpha, G, gap, it = kernels.smo_one_class(Q, total, tol, max_iter)
    rho = _rho(alpha, G)
    sv = alpha > 0.0
    return OcSvm(X[sv].copy(), alpha[sv] / total, rho / total, nu, gamma, float(gap), int(it), n)


def decision(model, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    return rbf_kernel(Z, model.support, model.gamma) @ model.alpha - model.rho


def detect(model, Z):
    """+1 for inliers, -1 for outliers; a decision of exactly zero is an inlier."""
    return np.where(decision(model, Z) >= 0.0, INLIER, OUTLIER)


def relabel_unknown(preds, verdicts, unknown=UNKNOWN):
    """Outliers become ``unknown``; inliers keep the classifier's argmax."""
    preds = np.asarray(preds)
    if preds.ndim == 2:
        preds = np.argmax(preds, axis=1)
    verdicts = np.asarray(verdicts)
    if preds.shape[0] != verdicts.shape[0]:
        raise ValueError("predictions and verdicts differ in length")
    return [unknown if v == OUTLIER else int(p) for p, v in zip(preds, verdicts)]


@dataclass
class OpenSetMetrics:
    evasion_rate: float
    detection_rate: float
    detected: int
    evaded: int
    total: int

    def to_dict(self):
        return dict(self.__dict__)


def openset_metrics(final_labels, unseen, benign=0, unknown=UNKNOWN):
    """Evasion and detection over samples whose family was unseen in training."""
    unseen = np.asarray(unseen, dtype=bool)
    if len(final_labels) != unseen.shape[0]:
        raise ValueError("labels and unseen flags differ in length")
    picked = [lab for lab, u in zip(final_labels, unseen) if u]
    total = len(picked)
    evaded = sum(1 for lab in picked if not isinstance(lab, str) and lab == benign)
    detected = sum(1 for lab in picked if lab == unknown)
    if total == 0:
        return OpenSetMetrics(0.0, 0.0, 0, 0, 0)
    return OpenSetMetrics(evaded / total, detected / total, detected, evaded, total)
