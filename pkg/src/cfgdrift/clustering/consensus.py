"""Silhouette-weighted consensus over several clusterings."""
from dataclasses import dataclass, field

import numpy as np

from .indices import silhouette
from .predictors import choose_k_inertia, density_cluster, gmm_fit, kmeans

PREDICTORS = ("kmeans", "gmm", "density")


def solution_weight(s):
    """Co-assignment increment for a solution with mean silhouette ``s``."""
    return (s - (-1.0)) / 2.0


@dataclass
class ConsensusMatrix:
    n: int
    cm: np.ndarray = None
    solution_count: int = 0
    weight_total: float = 0.0

    def __post_init__(self):
        if self.cm is None:
            self.cm = np.zeros((self.n, self.n))

    def update(self, labels, s):
        labels = np.asarray(labels)
        if labels.shape[0] != self.n:
            raise ValueError("labelling length does not match the matrix")
        w = solution_weight(s)
        self.cm += (labels[:, None] == labels[None, :]) * w
        self.solution_count += 1
        self.weight_total += w
        return self

    def normalized(self):
        if self.weight_total <= 0:
            return np.zeros_like(self.cm)
        return self.cm / self.weight_total


def consensus_update(cm, labels, s):
    return cm.update(labels, s)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    silhouette: float


@dataclass
class ConsensusResult:
    assignment: ClusterAssignment
    matrix: ConsensusMatrix
    solutions: dict = field(default_factory=dict)


def run_predictor(name, points, seed=0, k_range=range(1, 11)):
    if name == "kmeans":
        return kmeans(points, choose_k_inertia(points, k_range, seed), seed)
    if name == "gmm":
        return gmm_fit(points, seed=seed).labels
    if name == "density":
        return density_cluster(points)
    raise ValueError(f"unknown predictor {name!r}")


def consensus_cluster(points, predictors=PREDICTORS, original_labels=None, seed=0, k_range=range(1, 11)):
    """Accumulate every solution into the matrix, then cluster its rows with a BIC-selected GMM."""
    predictors = list(predictors)
    if not predictors:
        raise ValueError("empty predictor set")
    X = np.asarray(points, dtype=np.float64)
    cm = ConsensusMatrix(X.shape[0])
    solutions = {}
    for name in predictors:
        labels = run_predictor(name, X, seed, k_range)
        s = silhouette(X, labels)
        cm.update(labels, s)
        solutions[name] = (labels, s)
    if original_labels is not None:
        labels = np.asarray(original_labels)
        s = silhouette(X, labels)
        cm.update(labels, s)
        solutions["original"] = (labels, s)
    fit = gmm_fit(cm.normalized(), seed=seed)
    _, final = np.unique(fit.labels, return_inverse=True)
    assignment = ClusterAssignment(final.astype(np.int64), int(final.max()) + 1, silhouette(X, final))
    return ConsensusResult(assignment, cm, solutions)
