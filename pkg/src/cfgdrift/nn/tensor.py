"""Reverse-mode autodiff over numpy arrays.

Only the operations the GIN/GCN models, the domain-adaptation losses and the
graph autoencoder need are provided.  Every op builds a node holding its
parents and a closure that maps the output gradient to parent gradients;
``Tensor.backward`` walks the tape in reverse topological order.
"""
from contextlib import contextmanager

import numpy as np

from .. import kernels

LOG_CLAMP = 1e-12

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    ad, bd = a.data, b.data

    def back(g):
        return (
            _unbroadcast(g * bd, sa) if a.requires_grad else None,
            _unbroadcast(g * ad, sb) if b.requires_grad else None,
        )

    return _make(ad * bd, (a, b), back)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def back(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return _make(ad @ bd, (a, b), back)


def transpose(a):
    return _make(a.data.T, (a,), lambda g: (g.T,))


def tsum(a, axis=None):
    shape = a.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), back)


def tmean(a, axis=None):
    n = a.data.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / n)


def relu(a):
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a):
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def exp(a):
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back)


def take_rows(a, idx):
    idx = np.asarray(idx, dtype=np.int64)
    shape = a.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.data[idx], (a,), back)


def column(a, j):
    shape = a.shape

    def back(g):
        out = np.zeros(shape)
        out[:, j] = g
        return (out,)

    return _make(a.data[:, j].copy(), (a,), back)


# ---------------------------------------------------------------------------
# graph ops
# ---------------------------------------------------------------------------

def coo_matmul(rows, cols, vals, h, n_out=None):
    """out[rows[k]] += vals[k] * h[cols[k]] (constant sparse matrix times h)."""
    n_in = h.shape[0]
    n_out = n_in if n_out is None else n_out
    out = kernels.coo_matmul(rows, cols, vals, np.ascontiguousarray(h.data), n_out)

    def back(g):
        return (kernels.coo_matmul(cols, rows, vals, np.ascontiguousarray(g), n_in),)

    return _make(out, (h,), back)


def segment_sum(h, offsets):
    n = h.shape[0]
    counts = np.diff(offsets)
    seg_ids = np.repeat(np.arange(len(counts)), counts)

    def back(g):
        return (g[seg_ids] if n else np.zeros(h.shape),)

    return _make(kernels.segment_sum(np.ascontiguousarray(h.data), offsets), (h,), back)


def segment_mean(h, offsets):
    counts = np.diff(offsets).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("mean readout over an empty graph")
    return mul(segment_sum(h, offsets), Tensor((1.0 / counts)[:, None]))


# ---------------------------------------------------------------------------
# normalization and losses
# ---------------------------------------------------------------------------

def batch_norm(x, gamma, beta, eps, mean=None, var=None):
    """Batch norm over axis 0.  With mean/var given they are treated as constants."""
    xd = x.data
    if mean is None:
        mu = xd.mean(axis=0)
        xc = xd - mu
        var_b = (xc * xc).mean(axis=0)
        inv = 1.0 / np.sqrt(var_b + eps)
        xhat = xc * inv
        n = xd.shape[0]

        def back(g):
            gg = g * gamma.data
            gsum = g.sum(axis=0)
            gx = (g * xhat).sum(axis=0)
            dx = None
            if x.requires_grad:
                dx = (gamma.data * inv / n) * (n * g - gsum - xhat * gx)
            return dx, gx, gsum

        out = xhat * gamma.data + beta.data
        return _make(out, (x, gamma, beta), back), mu, var_b
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean) * inv

    def back_eval(g):
        return g * gamma.data * inv, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _make(xhat * gamma.data + beta.data, (x, gamma, beta), back_eval), mean, var


def softmax_np(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(a):
    p = softmax_np(a.data)

    def back(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _make(p, (a,), back)


def check_probability_targets(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or not np.allclose(t.sum(axis=-1), 1.0, atol=1e-9):
        raise ValueError("cross-entropy targets must be probability vectors")
    return t


def softmax_cross_entropy(logits, targets, weights=None):
    """Sum over rows of -t . log(clip(softmax(z))), optionally row-weighted."""
    t = check_probability_targets(targets)
    p = softmax_np(logits.data)
    pc = np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)
    w = np.ones(p.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    row_loss = -(t * np.log(pc)).sum(axis=-1)
    inside = (p >= LOG_CLAMP) & (p <= 1.0 - LOG_CLAMP)

    def back(g):
        dp = np.where(inside, -t / pc, 0.0) * (g * w)[:, None]
        return (p * (dp - (dp * p).sum(axis=-1, keepdims=True)),)

    return _make(np.asarray((w * row_loss).sum()), (logits,), back)


def bce(pred, target, weights=None):
    """Sum of -[y log p + (1-y) log(1-p)] with p clamped to [1e-12, 1-1e-12]."""
    y = np.asarray(target, dtype=np.float64)
    p = pred.data
    pc = np.clip(p, LOG_CLAMP, 1.0 - LOG_CLAMP)
    w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=np.float64)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p >= LOG_CLAMP) & (p <= 1.0 - LOG_CLAMP)

    def back(g):
        d = -(y / pc) + (1.0 - y) / (1.0 - pc)
        return (np.where(inside, d, 0.0) * w * g,)

    return _make(np.asarray((w * loss).sum()), (pred,), back)


def bce_with_logits(logits, target, weights=None):
    """Numerically stable sum of BCE(sigmoid(l), y) = softplus(l) - y*l."""
    y = np.asarray(target, dtype=np.float64)
    l = logits.data
    w = np.ones_like(l) if weights is None else np.asarray(weights, dtype=np.float64)
    loss = np.maximum(l, 0.0) - l * y + np.log1p(np.exp(-np.abs(l)))
    s = _sigmoid(l)
    return _make(np.asarray((w * loss).sum()), (logits,), lambda g: ((s - y) * w * g,))


def pairwise_sqdist(a, b):
    """||a_i - b_j||^2 as a differentiable (n, m) tensor."""
    aa = (a * a).sum(axis=1)
    bb = (b * b).sum(axis=1)
    n, m = a.shape[0], b.shape[0]
    cross = a @ b.T
    ones_m = Tensor(np.ones((1, m)))
    ones_n = Tensor(np.ones((n, 1)))
    return _reshape_col(aa) @ ones_m + ones_n @ _reshape_row(bb) - cross * 2.0


def _reshape_col(v):
    return _make(v.data[:, None], (v,), lambda g: (g[:, 0],))


def _reshape_row(v):
    return _make(v.data[None, :], (v,), lambda g: (g[0, :],))
