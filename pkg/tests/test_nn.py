import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cyclekit import _kernels
from cyclekit.basis import build_all_bases
from cyclekit.kg import add_targets_to_graph
from cyclekit.nn import (Adam, CheckpointError, CycleModel, ModelConfig, NonFiniteError, bce_loss,
                         gradient_check, init_params, load_checkpoint, save_checkpoint)
from cyclekit.nn.layers import gcn_backward, gcn_forward, mlp_forward
from cyclekit.nn.lstm import lstm_forward
from cyclekit.nn.model import route_max_gradient, softmax

from helpers import graph_from, tiny_instance


def lstm_params(d_e=4, d_h=3, num_tokens=6, layers=2, seed=0):
    cfg = ModelConfig(num_relations=num_tokens // 2, d_e=d_e, d_h=d_h, lstm_layers=layers)
    return init_params(cfg, seed)


# ----------------------------------------------------------------- encoder

def test_zero_parameters_give_zero_features():
    model, inst, _, _ = tiny_instance(0)
    for v in model.params.values():
        v[:] = 0
    feats, _ = model.encode(inst)
    assert feats.shape[1] == 20
    assert not feats.any()


def test_lstm_matches_torch():
    torch = pytest.importorskip("torch")
    p = lstm_params(seed=1)
    ref = torch.nn.LSTM(4, 3, num_layers=2, batch_first=True).double()
    with torch.no_grad():
        for layer in range(2):
            getattr(ref, f"weight_ih_l{layer}").copy_(torch.from_numpy(p[f"lstm.l{layer}.W"].T))
            getattr(ref, f"weight_hh_l{layer}").copy_(torch.from_numpy(p[f"lstm.l{layer}.U"].T))
            getattr(ref, f"bias_ih_l{layer}").copy_(torch.from_numpy(p[f"lstm.l{layer}.b"]))
            getattr(ref, f"bias_hh_l{layer}").zero_()
    rng = np.random.default_rng(0)
    lengths = np.array([5, 4, 4, 2, 1])
    tokens = rng.integers(0, 6, size=(5, 5))
    h, c, _ = lstm_forward(p, tokens, lengths)
    emb = torch.from_numpy(p["relation_embedding"])
    for i, n in enumerate(lengths):
        x = emb[torch.from_numpy(tokens[i, :n])][None]
        _, (th, tc) = ref(x)
        np.testing.assert_allclose(h[i], th[-1, 0].detach().numpy(), rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(c[i], tc[-1, 0].detach().numpy(), rtol=1e-12, atol=1e-13)


def test_identical_sequences_share_features():
    kg = graph_from([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a"),
                     ("d", "r", "e"), ("e", "r", "f"), ("f", "r", "d")])
    bundles = build_all_bases(kg, 1)
    model = CycleModel(ModelConfig(num_relations=1, k=1))
    inst = model.prepare(bundles, np.arange(6))
    assert inst.num_sequences == 1
    assert inst.bases[0].cycle_seq.tolist() == [0, 0]


# --------------------------------------------------------------------- gcn

def test_gcn_single_node_is_plain_matmul(rng):
    import scipy.sparse as sp
    adj = sp.identity(1, format="csr")
    x = rng.standard_normal((1, 4))
    w0, w1 = rng.standard_normal((4, 5)), rng.standard_normal((5, 2))
    out, _ = gcn_forward(adj, x, [w0, w1])
    np.testing.assert_allclose(out, np.maximum(x @ w0, 0) @ w1)
    zero, _ = gcn_forward(adj, x, [w0 * 0, w1])
    assert not zero.any()


def test_gcn_permutation_equivariance(rng):
    kg = graph_from([(0, "r", 1), (1, "r", 2), (2, "r", 0), (2, "r", 3), (3, "r", 0), (1, "s", 3)])
    (b,) = build_all_bases(kg, 1)
    from cyclekit.cycle_graph import cycle_graph
    adj = cycle_graph(b.incidence, 1).normalized_adjacency().toarray()
    n = adj.shape[0]
    x = rng.standard_normal((n, 4))
    ws = [rng.standard_normal((4, 3)), rng.standard_normal((3, 2))]
    perm = rng.permutation(n)
    out, _ = gcn_forward(adj, x, ws)
    outp, _ = gcn_forward(adj[np.ix_(perm, perm)], x[perm], ws)
    np.testing.assert_allclose(outp, out[perm], atol=1e-12)


def test_gcn_identity_backward_is_exact(rng):
    import scipy.sparse as sp
    a = sp.random(6, 6, density=0.5, random_state=1)
    adj = (a + a.T).tocsr()
    x = rng.standard_normal((6, 4))
    ws = [rng.standard_normal((4, 3)), rng.standard_normal((3, 2))]
    _, cache = gcn_forward(adj, x, ws, activation="identity")
    g = rng.standard_normal((6, 2))
    d_x, (g0, g1) = gcn_backward(adj, ws, cache, g, activation="identity")
    A = adj.toarray()
    np.testing.assert_allclose(d_x, A.T @ A.T @ g @ ws[1].T @ ws[0].T, rtol=1e-12)
    np.testing.assert_allclose(g1, (A @ x @ ws[0]).T @ A.T @ g, rtol=1e-12)
    np.testing.assert_allclose(g0, x.T @ A.T @ (A.T @ g @ ws[1].T), rtol=1e-12)


def test_gcn_shape_errors(rng):
    import scipy.sparse as sp
    with pytest.raises(ValueError):
        gcn_forward(sp.identity(2, format="csr"), rng.standard_normal((3, 4)), [np.zeros((4, 2))])
    with pytest.raises(ValueError):
        gcn_forward(sp.identity(3, format="csr"), rng.standard_normal((3, 4)), [np.zeros((5, 2))])


# --------------------------------------------------------- readout, routing

def test_mlp_readout(rng):
    x = rng.standard_normal((5, 4)) * 50
    p, _ = mlp_forward(x, np.zeros((4, 3)), np.zeros(3), np.zeros((3, 1)), np.zeros(1))
    assert (p == 0.5).all()
    p, _ = mlp_forward(x, rng.standard_normal((4, 3)), rng.standard_normal(3),
                       rng.standard_normal((3, 1)), rng.standard_normal(1))
    assert ((p > 0) & (p < 1)).all()
    empty, _ = mlp_forward(np.zeros((0, 4)), np.zeros((4, 3)), np.zeros(3), np.zeros((3, 1)), np.zeros(1))
    assert empty.shape == (0,)


def test_triplet_confidence_is_max_over_covering_cycles():
    ptr = np.array([0, 2, 2])
    cols = np.array([0, 2])
    y, arg = _kernels.segment_max(ptr, cols, np.array([0.3, 0.9, 0.7]))
    assert y.tolist() == [0.7, 0.0] and arg.tolist() == [2, -1]


def test_gradient_only_reaches_the_argmax():
    d = route_max_gradient(np.array([2, -1, 2, 0]), np.array([1.0, 5.0, 2.0, 0.5]), 4)
    assert d.tolist() == [0.5, 0.0, 3.0, 0.0]


def test_aggregate_examples():
    Y = np.array([[0.4], [0.8]])
    assert softmax(np.zeros(2)) @ Y == pytest.approx([0.6])
    assert softmax(np.array([3.0])) @ Y[:1] == pytest.approx([0.4])
    assert softmax(np.array([50.0, 0.0])) @ Y == pytest.approx([0.4], abs=1e-12)


@given(st.integers(0, 10**6))
def test_final_confidence_is_monotone_in_cycle_confidence(seed):
    rng = np.random.default_rng(seed)
    k, n_cyc, n_t = 3, 8, 6
    ptrs, colss = [], []
    for _ in range(k):
        counts = rng.integers(0, 4, size=n_t)
        ptrs.append(np.concatenate([[0], np.cumsum(counts)]))
        colss.append(rng.integers(0, n_cyc, size=counts.sum()))
    P = rng.random((k, n_cyc))
    w = softmax(rng.standard_normal(k))

    def final(P):
        return w @ np.stack([_kernels.segment_max(ptrs[b], colss[b], P[b])[0] for b in range(k)])

    base = final(P)
    b, i = int(rng.integers(k)), int(rng.integers(n_cyc))
    P2 = P.copy()
    P2[b, i] = min(1.0, P2[b, i] + rng.random())
    assert (final(P2) >= base).all()
    assert ((base >= 0) & (base <= 1)).all()


# -------------------------------------------------------------------- loss

def test_loss_examples():
    labels = np.array([1, 0, 1])
    perfect, _ = bce_loss(np.array([1.0, 0.0, 1.0]), labels)
    assert perfect < 1e-6
    half, _ = bce_loss(np.full(3, 0.5), labels)
    assert half == pytest.approx(math.log(2), rel=1e-12)
    wrong, _ = bce_loss(np.array([0.0, 1.0, 0.0]), labels)
    assert np.isfinite(wrong)


def test_loss_gradient(rng):
    y = rng.uniform(0.05, 0.95, size=7)
    labels = rng.integers(0, 2, size=7)
    _, g = bce_loss(y, labels)
    for i in range(7):
        e = np.zeros(7)
        e[i] = 1e-6
        num = (bce_loss(y + e, labels)[0] - bce_loss(y - e, labels)[0]) / 2e-6
        assert g[i] == pytest.approx(num, rel=1e-6)


# -------------------------------------------------------------- gradients

def _checked_instances(count, **kw):
    out, seed = [], 0
    while len(out) < count:
        model, inst, labels, _ = tiny_instance(seed, **kw)
        from cyclekit.nn.gradcheck import argmax_margin
        if argmax_margin(model, inst) > 1e-4:
            out.append((model, inst, labels))
        seed += 1
    return out


@pytest.mark.parametrize("kw", [{}, {"gcn_activation": "identity"}, {"feature": "lstm"},
                                {"feature": "bow"}, {"use_gcn": False}])
def test_gradients_match_finite_differences(kw):
    for model, inst, labels in _checked_instances(3, **kw):
        rep = gradient_check(model, inst, labels, n_probe=20, tol=1e-4)
        assert rep.passed, rep.failures


def test_zero_model_on_two_cycle_passes():
    # every target sits on exactly one 2-cycle, so the max has no ties
    kg = graph_from([("u", "r", "v"), ("u", "s", "v"), ("w", "r", "v")])
    from cyclekit.kg import TargetSet
    ts = TargetSet(np.array([[0, 0, 1], [2, 1, 1]]), np.array([1, 0]))
    wg = add_targets_to_graph(kg, ts)
    model = CycleModel(ModelConfig(num_relations=2, k=1, dropout=0.0))
    for v in model.params.values():
        v[:] = 0
    inst = model.prepare(build_all_bases(wg.graph, 1), wg.target_edges)
    assert gradient_check(model, inst, ts.labels, tol=1e-4).passed


def test_corrupted_gradient_is_caught():
    model, inst, labels = _checked_instances(1)[0]
    _, grads, _ = model.loss_and_grad(inst, labels, train=False)
    bad = {n: g * 1.01 for n, g in grads.items()}
    rep = gradient_check(model, inst, labels, grads=bad, tol=1e-4)
    assert not rep.passed
    assert rep.failures


# ---------------------------------------------------- runtime properties

def _train(model, inst, labels, epochs):
    opt = Adam()
    losses = []
    for epoch in range(epochs):
        loss, grads, _ = model.loss_and_grad(inst, labels, epoch)
        opt.step(model.params, grads)
        losses.append(loss)
    return losses


def test_training_is_deterministic():
    runs = []
    for _ in range(2):
        model, inst, labels, _ = tiny_instance(4, dropout=0.2)
        runs.append(_train(model, inst, labels, 5))
    assert runs[0] == runs[1]


def test_eval_ignores_dropout():
    model, inst, labels, _ = tiny_instance(5, dropout=0.5)
    a, b = model.predict(inst), model.predict(inst)
    assert a.tobytes() == b.tobytes()
    t1 = model.loss_and_grad(inst, labels, epoch=0)[0]
    t2 = model.loss_and_grad(inst, labels, epoch=1)[0]
    assert t1 != t2


def test_predictions_are_convex_combinations():
    model, inst, _, _ = tiny_instance(6)
    pred, _ = model.forward(inst)
    assert pred.weights.sum() == pytest.approx(1.0)
    assert ((pred.Y_final >= pred.Y.min(axis=0) - 1e-15) & (pred.Y_final <= pred.Y.max(axis=0) + 1e-15)).all()
    assert ((pred.Y_final >= 0) & (pred.Y_final <= 1)).all()


def test_entity_renaming_keeps_predictions():
    model, inst, labels, (kg, ts, wg, _) = tiny_instance(7, n=25, e=60, n_pos=15)
    perm = np.random.default_rng(1).permutation(kg.num_entities)
    kg2, ts2 = kg.relabel_entities(perm), ts.relabel_entities(perm)
    wg2 = add_targets_to_graph(kg2, ts2)
    inst2 = model.prepare(build_all_bases(wg2.graph, 3, seed=7), wg2.target_edges)
    assert model.predict(inst).tobytes() == model.predict(inst2).tobytes()


def test_nan_parameter_is_named():
    model, inst, labels, _ = tiny_instance(8)
    model.params["mlp.W1"][0, 0] = np.nan
    with pytest.raises(NonFiniteError, match="cycle confidence"):
        model.loss_and_grad(inst, labels)


def test_adam_matches_torch(rng):
    torch = pytest.importorskip("torch")
    w0 = rng.standard_normal((3, 4))
    ours = {"w": w0.copy()}
    theirs = torch.tensor(w0.copy(), requires_grad=True)
    opt_t = torch.optim.Adam([theirs], lr=0.005, weight_decay=5e-5)
    opt = Adam(lr=0.005, weight_decay=5e-5)
    for _ in range(10):
        g = rng.standard_normal((3, 4))
        opt.step(ours, {"w": g})
        theirs.grad = torch.from_numpy(g.copy())
        opt_t.step()
    np.testing.assert_allclose(ours["w"], theirs.detach().numpy(), rtol=1e-12, atol=1e-14)


def test_checkpoint_round_trip(tmp_path):
    model, _, _, _ = tiny_instance(9)
    path = str(tmp_path / "m.npz")
    save_checkpoint(path, model.config, model.params, 9, extra={"note": 1})
    cfg, params, seed, extra = load_checkpoint(path)
    assert cfg == model.config and seed == 9 and extra == {"note": 1}
    for name, v in model.params.items():
        assert params[name].tobytes() == v.tobytes()
        assert params[name].dtype == np.float64
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing.npz"))
    np.savez(str(tmp_path / "old.npz"), format_version=np.array(99))
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "old.npz"))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(num_relations=3, k=0)
    with pytest.raises(ValueError):
        ModelConfig(num_relations=3, feature="cnn")
    with pytest.raises(ValueError):
        CycleModel(ModelConfig(num_relations=2, k=2)).prepare([], [])
