import numpy as np
import pytest

from cfgdrift.features import AttributedGraph
from cfgdrift.nn import Adam, BatchNorm, Dense, GraphBatch, Tensor
from cfgdrift.nn.checkpoint import load_state, save_state, state_from_json, state_to_json
from cfgdrift.nn.layers import GCNLayer, GINLayer, constant_parameters, gin_aggregate, readout


def graph(rng, n, m=3, p=0.4):
    A = (rng.random((n, n)) < p).astype(np.int64)
    return AttributedGraph(rng.normal(size=(n, m)), A, np.array([1.0, 0.0]))


def test_graph_batch_block_diagonal():
    rng = np.random.default_rng(0)
    gs = [graph(rng, 3), graph(rng, 4)]
    b = GraphBatch.from_graphs(gs)
    dense = np.zeros((7, 7))
    np.add.at(dense, (b.rows, b.cols), b.vals)
    expect = np.zeros((7, 7))
    expect[:3, :3] = gs[0].A + gs[0].A.T
    expect[3:, 3:] = gs[1].A + gs[1].A.T
    assert np.array_equal(dense, expect)
    assert b.offsets.tolist() == [0, 3, 7]


def test_graph_batch_errors():
    with pytest.raises(ValueError):
        GraphBatch.from_graphs([AttributedGraph(np.zeros((0, 3)), np.zeros((0, 0)), np.ones(1))])
    with pytest.raises(ValueError):
        GraphBatch.from_graphs([AttributedGraph(np.zeros((2, 3)), np.zeros((3, 3)), np.ones(1))])


def test_gin_aggregate_matches_dense_formula():
    rng = np.random.default_rng(1)
    g = graph(rng, 5)
    b = GraphBatch.from_graphs([g])
    out = gin_aggregate(Tensor(g.X), b).data
    assert np.allclose(out, (np.eye(5) + g.A + g.A.T) @ g.X)


def test_gcn_operator_dense():
    rng = np.random.default_rng(2)
    g = graph(rng, 4)
    b = GraphBatch.from_graphs([g])
    S = g.A + g.A.T + np.eye(4)
    dinv = 1 / np.sqrt(S.sum(1))
    r, c, v = b.gcn_operator()
    dense = np.zeros((4, 4))
    np.add.at(dense, (r, c), v)
    assert np.allclose(dense, dinv[:, None] * S * dinv[None, :])


def test_layer_row_mismatch_raises():
    rng = np.random.default_rng(3)
    b = GraphBatch.from_graphs([graph(rng, 4)])
    with pytest.raises(ValueError):
        GINLayer(3, 8, rng)(Tensor(np.zeros((5, 3))), b)
    with pytest.raises(ValueError):
        GCNLayer(3, 8, rng)(Tensor(np.zeros((5, 3))), b)


def test_readout_modes():
    h = Tensor(np.arange(10.0).reshape(5, 2))
    off = np.array([0, 2, 5])
    assert readout(h, off, "sum").data.tolist() == [[2, 4], [18, 21]]
    assert readout(h, off, "mean").data.tolist() == [[1, 2], [6, 7]]
    with pytest.raises(ValueError):
        readout(h, off, "max")


def test_batchnorm_running_stats_and_eval():
    bn = BatchNorm(2)
    x = np.array([[1.0, 2.0], [3.0, 6.0]])
    bn(Tensor(x))
    assert np.allclose(bn.running_mean, 0.1 * x.mean(0))
    assert np.allclose(bn.running_var, 0.9 + 0.1 * x.var(0, ddof=1))
    bn.eval()
    out = bn(Tensor(x)).data
    assert np.allclose(out, (x - bn.running_mean) / np.sqrt(bn.running_var + 1e-5))


def test_batchnorm_frozen_uses_running_stats():
    bn = BatchNorm(2)
    bn.freeze()
    before = bn.running_mean.copy()
    bn(Tensor(np.random.default_rng(0).normal(size=(4, 2))))
    assert np.array_equal(bn.running_mean, before)


def test_constant_parameters_blocks_gradients():
    rng = np.random.default_rng(4)
    d = Dense(3, 2, rng)
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    with constant_parameters(d):
        d(x).sum().backward()
    assert d.W.grad is None and x.grad is not None
    assert d.W.requires_grad


def test_adam_matches_reference():
    rng = np.random.default_rng(5)
    w0 = rng.normal(size=(3, 2))
    p = Tensor(w0.copy(), requires_grad=True)
    opt = Adam([p], lr=0.01)
    ref, m, v = w0.copy(), np.zeros_like(w0), np.zeros_like(w0)
    for t in range(1, 6):
        g = rng.normal(size=w0.shape)
        p.grad = g
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p.data, ref, rtol=1e-12, atol=1e-14)


def test_module_state_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    layer = GINLayer(3, 4, rng)
    b = GraphBatch.from_graphs([graph(rng, 5)])
    layer(Tensor(b.x), b)
    state = layer.state()
    assert "mlp.l1.bn.running_mean" in state and "mlp.l2.dense.W" in state
    save_state(tmp_path / "c.json", state, {"k": 1})
    loaded, meta = load_state(tmp_path / "c.json")
    assert meta == {"k": 1}
    other = GINLayer(3, 4, np.random.default_rng(99))
    other.load_state(loaded)
    assert all(np.array_equal(other.state()[k], v) for k, v in state.items())


def test_checkpoint_version_and_shape_checks():
    text = state_to_json({"w": np.ones((2, 2))}).replace('"version": 1', '"version": 7')
    with pytest.raises(ValueError):
        state_from_json(text)
    d = Dense(2, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        d.load_state({"W": np.ones((3, 2))})
