"""Two-domain synthetic benchmark: one stochastic block model per class.

Class 0 is benign; classes 1..n_families are malware families.  Each class
owns a block-connectivity matrix and per-block attribute means.  Target
graphs come from the same generators with attributes shifted along a common
direction, extra per-graph variation along a few fixed directions, and
perturbed connectivity, all scaled by ``drift``.
"""
from dataclasses import dataclass, field

import numpy as np

from ..features import AttributedGraph, one_hot


@dataclass
class SynthParams:
    n_families: int = 3
    n_source: int = 200
    n_target: int = 400
    min_nodes: int = 10
    max_nodes: int = 20
    n_blocks: int = 3
    dim: int = 16
    drift: float = 1.0
    benign_ratio: float = 1.0
    label_mode: str = "family"
    class_sep: float = 1.3
    node_noise: float = 1.0
    graph_noise: float = 0.6
    shift_scale: float = 1.5
    edge_perturb: float = 0.25
    nuisance_rank: int = 3
    nuisance_scale: float = 0.3
    seed: int = 0

    @property
    def n_classes(self):
        return 2 if self.label_mode == "binary" else self.n_families + 1


@dataclass
class ClassGenerator:
    probs: np.ndarray       # n_blocks x n_blocks edge probabilities
    means: np.ndarray       # n_blocks x dim attribute means
    block_weights: np.ndarray


@dataclass
class SynthDataset:
    params: SynthParams
    graphs: list
    records: list = field(default_factory=list)

    def select(self, domain):
        return [g for g in self.graphs if g.d == domain]


def _class_generators(p, rng):
    gens = []
    for _ in range(p.n_families + 1):
        probs = rng.uniform(0.05, 0.35, size=(p.n_blocks, p.n_blocks))
        probs[np.diag_indices(p.n_blocks)] = rng.uniform(0.3, 0.6, size=p.n_blocks)
        means = rng.normal(0.0, p.class_sep, size=(p.n_blocks, p.dim))
        w = rng.dirichlet(np.full(p.n_blocks, 4.0))
        gens.append(ClassGenerator(probs, means, w))
    return gens


def _sample_graph(gen, p, rng, shift, probs, nuisance=None):
    n = int(rng.integers(p.min_nodes, p.max_nodes + 1))
    blocks = rng.choice(p.n_blocks, size=n, p=gen.block_weights)
    pm = probs[blocks[:, None], blocks[None, :]]
    A = (rng.random((n, n)) < pm).astype(np.int64)
    np.fill_diagonal(A, 0)
    # a chain keeps every block reachable, as in a real CFG
    A[np.arange(n - 1), np.arange(1, n)] = 1
    offset = rng.normal(0.0, p.graph_noise, size=p.dim)
    if nuisance is not None:
        offset = offset + rng.normal(0.0, 1.0, size=nuisance.shape[0]) @ nuisance
    X = gen.means[blocks] + offset + rng.normal(0.0, p.node_noise, size=(n, p.dim)) + shift
    return X, A


def _class_counts(total, p):
    n_benign = int(round(total * p.benign_ratio / (1.0 + p.benign_ratio)))
    mal = total - n_benign
    per = [mal // p.n_families + (1 if k < mal % p.n_families else 0) for k in range(p.n_families)]
    return [n_benign] + per


def synth_drift(params=None, **overrides):
    """Generate source (d=0) and target (d=1) graphs, deterministic in ``seed``."""
    p = params or SynthParams()
    if overrides:
        p = SynthParams(**{**p.__dict__, **overrides})
    if p.label_mode not in ("binary", "family"):
        raise ValueError(f"unknown label mode {p.label_mode!r}")
    rng = np.random.default_rng(p.seed)
    gens = _class_generators(p, rng)
    direction = rng.normal(0.0, 1.0, size=p.dim)
    direction *= p.shift_scale / np.linalg.norm(direction) * np.sqrt(p.dim) / 4.0
    perturb = [rng.uniform(-1.0, 1.0, size=g.probs.shape) for g in gens]
    # target-only per-graph variation along a few fixed directions
    basis = np.linalg.qr(rng.normal(size=(p.dim, max(p.nuisance_rank, 1))))[0].T[: p.nuisance_rank]
    nuisance = basis * (p.drift * p.nuisance_scale * np.sqrt(p.dim) / 2.0)

    graphs, records = [], []
    for domain, total in ((0, p.n_source), (1, p.n_target)):
        shift = direction * p.drift if domain == 1 else np.zeros(p.dim)
        counts = _class_counts(total, p)
        for c, count in enumerate(counts):
            gen = gens[c]
            probs = gen.probs
            if domain == 1:
                probs = np.clip(probs + p.drift * p.edge_perturb * perturb[c], 0.0, 1.0)
            for k in range(count):
                X, A = _sample_graph(gen, p, rng, shift, probs, nuisance if domain == 1 else None)
                label = (0 if c == 0 else 1) if p.label_mode == "binary" else c
                family = "benign" if c == 0 else f"fam{c}"
                sid = f"{'src' if domain == 0 else 'tgt'}-{family}-{k:04d}"
                # source months 1..6, target months 7..12
                month = int(rng.integers(1, 7)) + 6 * domain
                meta = {"family": family, "timestamp": f"2024-{month:02d}"}
                graphs.append(AttributedGraph(X, A, one_hot(label, p.n_classes), domain, sid, meta))
                records.append({"sample_id": sid, "label": label, "family": family,
                                "timestamp": meta["timestamp"], "domain": "source" if domain == 0 else "target"})
    return SynthDataset(p, graphs, records)
