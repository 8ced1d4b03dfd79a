"""Central-difference gradient checks."""
from dataclasses import dataclass

import numpy as np


@dataclass
class GradReport:
    max_rel_err: float
    worst: str
    n_checked: int
    n_skipped: int

    def ok(self, tol):
        return self.max_rel_err < tol


def rel_err(a, n, floor=1e-8):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def grad_check(loss_fn, params, h=1e-6, max_entries=None, rng=None, analytic=None, floor=1e-8):
    """Compare analytic gradients of ``loss_fn()`` with central differences.

    ``params`` maps a name to a Tensor; ``loss_fn`` rebuilds the graph from the
    current parameter values and returns a scalar Tensor.  Entries whose two
    one-sided differences disagree strongly sit on a ReLU/clamp kink and are
    skipped.  ``analytic`` may override the gradients (negative controls).
    """
    params = dict(params)
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in params.items()}
    if analytic is not None:
        grads.update(analytic)

    worst, worst_name = 0.0, ""
    checked = skipped = 0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            rng = rng or np.random.default_rng(0)
            idx = rng.choice(flat.size, max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(loss_fn().data)
            flat[i] = orig - h
            fm = float(loss_fn().data)
            flat[i] = orig
            f0 = float(loss.data)
            fwd, bwd = (fp - f0) / h, (f0 - fm) / h
            num = (fp - fm) / (2 * h)
            if abs(fwd - bwd) > 1e-3 * max(abs(fwd), abs(bwd), 1.0):
                skipped += 1
                continue
            err = float(rel_err(grads[name].reshape(-1)[i], num, floor))
            checked += 1
            if err > worst:
                worst, worst_name = err, f"{name}[{i}]"
    return GradReport(worst, worst_name, checked, skipped)
