"""Parameterised layers and the graph batch they operate on."""
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor,
    batch_norm,
    coo_matmul,
    concat,
    relu,
    segment_mean,
    segment_sum,
)


class Module:
    """Minimal container: named parameters, named buffers, train/eval flag."""

    def __init__(self):
        self.training = True
        self.frozen = False

    def children(self):
        for name, val in vars(self).items():
            if isinstance(val, Module):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for k, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{name}.{k}", item

    def own_parameters(self):
        return [(n, v) for n, v in vars(self).items() if isinstance(v, Tensor)]

    def own_buffers(self):
        return []

    def named_parameters(self, prefix=""):
        for name, p in self.own_parameters():
            yield prefix + name, p
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self):
        out = []

        def walk(mod):
            if mod.frozen:
                return
            out.extend(p for _, p in mod.own_parameters())
            for _, child in mod.children():
                walk(child)

        walk(self)
        return out

    def named_buffers(self, prefix=""):
        for name, b in self.own_buffers():
            yield prefix + name, b
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def state(self):
        """Flat map of parameter and buffer arrays keyed by layer path."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update({name: b for name, b in self.named_buffers()})
        return out

    def load_state(self, state):
        params = dict(self.named_parameters())
        for name, arr in state.items():
            if name in params:
                if params[name].data.shape != np.shape(arr):
                    raise ValueError(f"shape mismatch for {name}")
                params[name].data = np.array(arr, dtype=np.float64)
        for mod_prefix, mod in self.named_modules():
            for bname, _ in mod.own_buffers():
                key = mod_prefix + bname
                if key in state:
                    setattr(mod, bname, np.array(state[key], dtype=np.float64))

    def named_modules(self, prefix=""):
        yield prefix, self
        for name, child in self.children():
            yield from child.named_modules(f"{prefix}{name}.")

    def train(self, mode=True):
        for _, mod in self.named_modules():
            mod.training = mode
        return self

    def eval(self):
        return self.train(False)

    def freeze(self, flag=True):
        for _, mod in self.named_modules():
            mod.frozen = flag
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Dense(Module):
    def __init__(self, n_in, n_out, rng, zero_init=False, bias=True):
        super().__init__()
        W = np.zeros((n_in, n_out)) if zero_init else glorot(rng, n_in, n_out)
        self.W = Tensor(W, requires_grad=True)
        self.b = Tensor(np.zeros(n_out), requires_grad=True) if bias else None

    def own_parameters(self):
        out = [("W", self.W)]
        if self.b is not None:
            out.append(("b", self.b))
        return out

    def __call__(self, x):
        y = x @ self.W
        return y + self.b if self.b is not None else y


class BatchNorm(Module):
    """Batch statistics in train mode, running statistics in eval mode.

    A frozen BatchNorm behaves as in eval mode regardless of the flag.
    """

    def __init__(self, dim, momentum=0.1, eps=1e-5):
        super().__init__()
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps
        self.update_stats = True

    def own_buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def __call__(self, x):
        if self.training and not self.frozen:
            out, mu, var = batch_norm(x, self.gamma, self.beta, self.eps)
            if self.update_stats:
                n = x.shape[0]
                unbiased = var * n / (n - 1) if n > 1 else var
                m = self.momentum
                self.running_mean = (1 - m) * self.running_mean + m * mu
                self.running_var = (1 - m) * self.running_var + m * unbiased
            return out
        out, _, _ = batch_norm(x, self.gamma, self.beta, self.eps, self.running_mean, self.running_var)
        return out


class DenseBlock(Module):
    """Dense -> BatchNorm -> ReLU."""

    def __init__(self, n_in, n_out, rng, norm=True):
        super().__init__()
        self.dense = Dense(n_in, n_out, rng)
        self.bn = BatchNorm(n_out) if norm else None

    def __call__(self, x):
        h = self.dense(x)
        if self.bn is not None:
            h = self.bn(h)
        return relu(h)


@contextmanager
def constant_parameters(module):
    """Treat a module's parameters as constants (no gradients) inside the block."""
    params = module.parameters()
    flags = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, f in zip(params, flags):
            p.requires_grad = f


def set_stat_updates(module, flag):
    for _, mod in module.named_modules():
        if isinstance(mod, BatchNorm):
            mod.update_stats = flag


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

@dataclass
class GraphBatch:
    """Disjoint union of graphs: stacked node rows, block-diagonal adjacency.

    ``rows/cols/vals`` hold the symmetrized multigraph A + A^T in COO form so
    that aggregation is ``out[rows] += vals * h[cols]``.
    """

    x: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    offsets: np.ndarray
    _gcn: tuple = None

    @property
    def n_nodes(self):
        return self.x.shape[0]

    @property
    def n_graphs(self):
        return self.offsets.shape[0] - 1

    @classmethod
    def from_graphs(cls, graphs):
        xs = []
        rows, cols, vals = [], [], []
        offsets = [0]
        for g in graphs:
            n = g.X.shape[0]
            if n == 0:
                raise ValueError(f"graph {getattr(g, 'sample_id', '')!r} has no nodes")
            A = np.asarray(g.A)
            if A.shape != (n, n):
                raise ValueError(f"adjacency shape {A.shape} does not match {n} nodes")
            S = A + A.T
            r, c = np.nonzero(S)
            base = offsets[-1]
            rows.append(r + base)
            cols.append(c + base)
            vals.append(S[r, c].astype(np.float64))
            xs.append(np.asarray(g.X, dtype=np.float64))
            offsets.append(base + n)
        return cls(
            np.ascontiguousarray(np.concatenate(xs)),
            np.concatenate(rows).astype(np.int64),
            np.concatenate(cols).astype(np.int64),
            np.concatenate(vals),
            np.asarray(offsets, dtype=np.int64),
        )

    def aggregate(self, h):
        """Neighbour sum with edge multiplicities."""
        return coo_matmul(self.rows, self.cols, self.vals, h)

    def gcn_operator(self):
        """COO of D^-1/2 (A_sym + I) D^-1/2."""
        if self._gcn is None:
            n = self.n_nodes
            idx = np.arange(n, dtype=np.int64)
            rows = np.concatenate([self.rows, idx])
            cols = np.concatenate([self.cols, idx])
            vals = np.concatenate([self.vals, np.ones(n)])
            deg = np.bincount(rows, weights=vals, minlength=n)
            dinv = 1.0 / np.sqrt(deg)
            self._gcn = (rows, cols, vals * dinv[rows] * dinv[cols])
        return self._gcn


def gin_aggregate(h, batch, eps=0.0):
    """(1 + eps) * h_v + sum of neighbour features."""
    agg = batch.aggregate(h)
    return h + agg if eps == 0.0 else h * (1.0 + eps) + agg


def gin_layer(h, batch, mlp, eps=0.0):
    if h.shape[0] != batch.n_nodes:
        raise ValueError(f"feature rows {h.shape[0]} != node count {batch.n_nodes}")
    return mlp(gin_aggregate(h, batch, eps))


def gcn_layer(h, batch, W, activation=relu):
    if h.shape[0] != batch.n_nodes:
        raise ValueError(f"feature rows {h.shape[0]} != node count {batch.n_nodes}")
    rows, cols, vals = batch.gcn_operator()
    out = coo_matmul(rows, cols, vals, h @ W)
    return activation(out) if activation is not None else out


def readout(h, offsets, mode="mean"):
    if mode == "mean":
        return segment_mean(h, offsets)
    if mode == "sum":
        return segment_sum(h, offsets)
    raise ValueError(f"unknown readout {mode!r}")


def jk_concat(readouts):
    if len(readouts) == 1:
        return readouts[0]
    return concat(readouts, axis=1)


class GinMLP(Module):
    """Two dense layers, each followed by batch norm and ReLU."""

    def __init__(self, n_in, n_hidden, rng):
        super().__init__()
        self.l1 = DenseBlock(n_in, n_hidden, rng)
        self.l2 = DenseBlock(n_hidden, n_hidden, rng)

    def __call__(self, x):
        return self.l2(self.l1(x))


class GINLayer(Module):
    eps = 0.0  # GIN-0

    def __init__(self, n_in, n_hidden, rng):
        super().__init__()
        self.mlp = GinMLP(n_in, n_hidden, rng)

    def __call__(self, h, batch):
        return gin_layer(h, batch, self.mlp, self.eps)


class GCNLayer(Module):
    def __init__(self, n_in, n_out, rng, activation=relu):
        super().__init__()
        self.W = Tensor(glorot(rng, n_in, n_out), requires_grad=True)
        self.activation = activation

    def __call__(self, h, batch):
        return gcn_layer(h, batch, self.W, self.activation)
