import numpy as np
import pytest

from cfgdrift.nn import tensor as T
from cfgdrift.nn.gradcheck import grad_check, rel_err
from cfgdrift.nn.tensor import Tensor


def param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


OPS = {
    "matmul_add": lambda a, b: ((a @ b) + 1.5).sum(),
    "mul_broadcast": lambda a, b: (a * b.T.sum(axis=0)).sum(),
    "sub_neg": lambda a, b: (T.relu(a - 0.1) * (-a)).sum() - b.sum(),
    "sigmoid_exp": lambda a, b: (T.sigmoid(a) + T.exp(a * 0.3)).sum() + (b * b).sum(),
    "concat_take": lambda a, b: (T.take_rows(T.concat([a, a * 2.0], axis=1), [0, 2, 2]) * 3.0).sum()
    + b.mean(),
    "softmax_col": lambda a, b: (T.column(T.softmax(a), 1) * T.column(T.softmax(a), 0)).sum() + b.sum(),
    "pairwise": lambda a, b: T.pairwise_sqdist(a, b.T).sum(),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradients(name):
    rng = np.random.default_rng(7)
    a, b = param(rng, 4, 3), param(rng, 3, 4)
    rep = grad_check(lambda: OPS[name](a, b), {"a": a, "b": b})
    assert rep.ok(1e-6), rep


def test_losses_gradients():
    rng = np.random.default_rng(1)
    z = param(rng, 5, 3)
    t = np.eye(3)[rng.integers(0, 3, 5)]
    w = rng.random(5)
    assert grad_check(lambda: T.softmax_cross_entropy(z, t, w), {"z": z}).ok(1e-6)
    p = Tensor(rng.uniform(0.05, 0.95, 6), requires_grad=True)
    y = rng.integers(0, 2, 6)
    assert grad_check(lambda: T.bce(p, y), {"p": p}).ok(1e-6)
    logit = param(rng, 6)
    assert grad_check(lambda: T.bce_with_logits(logit, y), {"l": logit}).ok(1e-6)


def test_batch_norm_gradients():
    rng = np.random.default_rng(2)
    x = param(rng, 6, 4)
    g = Tensor(rng.uniform(0.5, 1.5, 4), requires_grad=True)
    b = param(rng, 4)
    w = rng.normal(size=(6, 4))

    def loss():
        out, _, _ = T.batch_norm(x, g, b, 1e-5)
        return (out * w).sum()

    assert grad_check(loss, {"x": x, "gamma": g, "beta": b}).ok(1e-6)


def test_graph_op_gradients():
    rng = np.random.default_rng(3)
    h = param(rng, 5, 2)
    rows = np.array([0, 1, 1, 3, 4])
    cols = np.array([1, 0, 2, 4, 4])
    vals = np.array([1.0, 2.0, 0.5, 1.0, 3.0])
    offsets = np.array([0, 3, 5])
    assert grad_check(lambda: (T.coo_matmul(rows, cols, vals, h) * h).sum(), {"h": h}).ok(1e-6)
    assert grad_check(lambda: (T.segment_mean(h, offsets) * T.segment_sum(h, offsets)).sum(), {"h": h}).ok(1e-6)


def test_gradcheck_negative_control():
    rng = np.random.default_rng(4)
    a = param(rng, 3, 3)
    wrong = {"a": np.zeros((3, 3))}
    rep = grad_check(lambda: (a @ a).sum(), {"a": a}, analytic=wrong)
    assert not rep.ok(1e-4)


def test_rel_err_floor():
    assert rel_err(0.0, 1e-12) < 1e-3
    assert rel_err(1.0, 2.0) == pytest.approx(0.5)


def test_clamped_log_is_finite():
    p = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    loss = T.bce(p, np.array([1.0, 0.0]))
    loss.backward()
    assert loss.data == pytest.approx(-2 * np.log(1e-12))
    assert np.all(np.isfinite(p.grad))


def test_cross_entropy_rejects_non_probability_targets():
    with pytest.raises(ValueError):
        T.softmax_cross_entropy(Tensor(np.zeros((1, 2))), np.array([[0.7, 0.7]]))


def test_no_grad_builds_no_tape():
    a = Tensor(np.ones(3), requires_grad=True)
    with T.no_grad():
        out = (a * 2.0).sum()
    assert not out.requires_grad and out._parents == ()


def test_backward_needs_scalar():
    with pytest.raises(ValueError):
        (Tensor(np.ones(3), requires_grad=True) * 2.0).backward()


def test_gradient_accumulates_over_shared_use():
    a = Tensor(np.array([2.0]), requires_grad=True)
    (a * a + a).sum().backward()
    assert a.grad[0] == pytest.approx(5.0)
