"""Per-graph graph autoencoder: GCN encoder, inner-product decoder."""
from dataclasses import dataclass, field

import numpy as np

from ..nn.layers import GCNLayer, GraphBatch
from ..nn.optim import Adam
from ..nn.tensor import LOG_CLAMP, Tensor, _sigmoid, bce_with_logits, no_grad, take_rows

NEG_SAMPLE_THRESHOLD = 1000


@dataclass
class GaeResult:
    vector: np.ndarray
    Z: np.ndarray
    losses: list = field(default_factory=list)


class GaeEncoder:
    def __init__(self, n_in, rng, hidden=128, d_z=256):
        self.l1 = GCNLayer(n_in, hidden, rng)
        self.l2 = GCNLayer(hidden, d_z, rng, activation=None)

    def parameters(self):
        return self.l1.parameters() + self.l2.parameters()

    def __call__(self, x, batch):
        return self.l2(self.l1(x, batch), batch)


def reconstruction_target(A):
    """Symmetrized 0/1 adjacency with self-loops counted as positive pairs."""
    A = np.asarray(A)
    T = ((A + A.T) > 0).astype(np.float64)
    np.fill_diagonal(T, 1.0)
    return T


def decode(Z):
    """sigmoid(Z Z^T), kept strictly inside (0, 1) like the loss clamps."""
    return np.clip(_sigmoid(Z @ Z.T), LOG_CLAMP, 1.0 - LOG_CLAMP)


def recon_loss(Z, target, pairs=None):
    """Mean BCE between sigmoid(z_i . z_j) and the target, over all pairs or a subset."""
    if pairs is None:
        logits = Z @ Z.T
        return bce_with_logits(logits, target) * (1.0 / target.size)
    I, J = pairs
    logits = (take_rows(Z, I) * take_rows(Z, J)).sum(axis=1)
    return bce_with_logits(logits, target[I, J]) * (1.0 / len(I))


def _sample_pairs(target, rng):
    pos = np.argwhere(target > 0)
    neg_count = min(len(pos), target.size - len(pos))
    neg = []
    n = target.shape[0]
    while len(neg) < neg_count:
        cand = rng.integers(0, n, size=(2 * neg_count, 2))
        cand = cand[target[cand[:, 0], cand[:, 1]] == 0]
        neg.extend(cand.tolist())
    neg = np.asarray(neg[:neg_count], dtype=np.int64).reshape(-1, 2)
    both = np.vstack([pos, neg])
    return both[:, 0], both[:, 1]


def train_gae(graph, epochs=200, lr=1e-2, hidden=128, d_z=256, seed=0):
    """Train on one graph from scratch; the graph vector is the mean node embedding."""
    batch = GraphBatch.from_graphs([graph])
    rng = np.random.default_rng(seed)
    enc = GaeEncoder(batch.x.shape[1], rng, hidden, d_z)
    opt = Adam(enc.parameters(), lr=lr)
    target = reconstruction_target(graph.A)
    x = Tensor(batch.x)
    big = target.shape[0] > NEG_SAMPLE_THRESHOLD
    losses = []
    for _ in range(epochs):
        Z = enc(x, batch)
        loss = recon_loss(Z, target, _sample_pairs(target, rng) if big else None)
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(float(loss.data))
    with no_grad():
        Z = enc(x, batch).data
        final = recon_loss(Tensor(Z), target, _sample_pairs(target, rng) if big else None)
    losses.append(float(final.data))
    return GaeResult(Z.mean(axis=0), Z, losses)


def embed_graphs(graphs, epochs=200, lr=1e-2, hidden=128, d_z=256, seed=0):
    return np.vstack([train_gae(g, epochs, lr, hidden, d_z, seed).vector for g in graphs])
