"""Two-stage training: schedules, source stage, graph stage, bookkeeping."""

import copy

import numpy as np
import pytest

from adagraph.errors import EmptyDataset, LabelError, UnknownDomain
from adagraph.graph import DomainGraph, KernelConfig, NodeRole
from adagraph.network import Network, network_to_dict
from adagraph.training import (
    TrainConfig,
    accuracy,
    make_schedule,
    stage1_source,
    stage2_graph,
)


def blobs(n, centers, rng, noise=0.3):
    """Gaussian blobs, one class per center."""
    y = rng.integers(0, len(centers), size=n)
    x = np.asarray(centers, dtype=np.float64)[y] + rng.normal(0, noise, (n, 2))
    return x, y.astype(np.int64)


def logistic_oracle(x, y, epochs=500, lr=0.5):
    """Plain logistic-regression accuracy, trained full-batch; the reference
    for "this dataset is linearly separable"."""
    rng = np.random.default_rng(0)
    w = np.zeros(x.shape[1] + 1)
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(xb @ w)))
        w -= lr * xb.T @ (p - y) / len(y)
    p = 1.0 / (1.0 + np.exp(-(xb @ w)))
    return float(np.mean((p > 0.5) == y))


def fresh_net(seed=0, classes=2, hidden=8):
    return Network.create(2, hidden, classes,
                          rng=np.random.default_rng(seed))


# -- make_schedule -----------------------------------------------------------

def test_schedule_batch_count():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(32, 2))
    batches = list(make_schedule({"d": (x, None)}, 16, seed=0))
    assert len(batches) == 2
    assert all(b[1].shape == (16, 2) for b in batches)


def test_schedule_never_mixes_domains_and_covers_all():
    rng = np.random.default_rng(1)
    data = {"a": (rng.normal(size=(40, 2)), np.zeros(40, dtype=np.int64)),
            "b": (rng.normal(10.0, 1.0, size=(48, 2)), None)}
    seen = {"a": [], "b": []}
    for domain, xb, yb in make_schedule(data, 16, seed=3):
        assert domain in ("a", "b")
        if domain == "a":
            assert np.all(np.abs(xb) < 8)  # only a-samples in a-batches
        else:
            assert np.all(xb > 2)
            assert yb is None
        seen[domain].append(xb)
    # every sample visited once per epoch (partial batches < 2 dropped)
    assert sum(len(b) for b in seen["a"]) == 40
    assert sum(len(b) for b in seen["b"]) == 48


def test_schedule_deterministic_under_seed():
    rng = np.random.default_rng(2)
    data = {"a": (rng.normal(size=(33, 2)), None),
            "b": (rng.normal(size=(20, 2)), None)}
    run1 = [(d, xb.copy()) for d, xb, _ in make_schedule(data, 8, seed=7)]
    run2 = [(d, xb.copy()) for d, xb, _ in make_schedule(data, 8, seed=7)]
    assert len(run1) == len(run2)
    for (d1, x1), (d2, x2) in zip(run1, run2):
        assert d1 == d2 and np.array_equal(x1, x2)


def test_schedule_empty_domain():
    with pytest.raises(EmptyDataset):
        list(make_schedule({"a": (np.empty((0, 2)), None)}, 8, seed=0))


# -- stage1_source -----------------------------------------------------------

def test_stage1_separable_blobs_one_epoch():
    rng = np.random.default_rng(3)
    x, y = blobs(200, [[-2.0, 0.0], [2.0, 0.0]], rng)
    assert logistic_oracle(x, y) == 1.0  # linearly separable by construction
    net = fresh_net()
    cfg = TrainConfig(epochs_stage1=1, seed=0)
    log = stage1_source(net, "src", x, y, cfg)
    assert accuracy(net, x, y, "src") >= 0.95
    assert all(row.term == "ce" for row in log)


def test_stage1_loss_decreases_over_training():
    rng = np.random.default_rng(4)
    x, y = blobs(200, [[-1.5, 0.0], [1.5, 0.0]], rng)
    net = fresh_net(seed=1)
    log = stage1_source(net, "src", x, y, TrainConfig(epochs_stage1=5, seed=1))
    per_epoch = len(log) // 5
    first = np.mean([r.value for r in log[:per_epoch]])
    last = np.mean([r.value for r in log[-per_epoch:]])
    assert last < first


def test_stage1_zero_epochs_unchanged():
    net = fresh_net(seed=2)
    before = network_to_dict(copy.deepcopy(net))
    rng = np.random.default_rng(5)
    x, y = blobs(50, [[-1, 0], [1, 0]], rng)
    stage1_source(net, "src", x, y, TrainConfig(epochs_stage1=0))
    after = network_to_dict(net)
    assert before["shared"] == after["shared"]


def test_stage1_errors():
    net = fresh_net(seed=3)
    with pytest.raises(EmptyDataset):
        stage1_source(net, "src", np.empty((0, 2)), np.empty(0), TrainConfig())
    rng = np.random.default_rng(6)
    x, _ = blobs(20, [[0, 0]], rng)
    with pytest.raises(LabelError):
        stage1_source(net, "src", x, None, TrainConfig())


# -- stage2_graph ------------------------------------------------------------

def trained_setup(seed=0, n_aux=2, n=120, shift=0.0):
    """Stage-1-trained net plus a graph and auxiliary data."""
    rng = np.random.default_rng(seed)
    x, y = blobs(n, [[-2.0, 0.0], [2.0, 0.0]], rng)
    net = fresh_net(seed=seed)
    cfg = TrainConfig(epochs_stage1=3, seed=seed)
    stage1_source(net, "src", x, y, cfg)
    g = DomainGraph(1, KernelConfig(0.1))
    g.add_node("src", [0.0], NodeRole.SOURCE)
    aux = {}
    for i in range(n_aux):
        xa, ya = blobs(n, [[-2.0 + shift, 0.0], [2.0 + shift, 0.0]],
                       np.random.default_rng(seed + 100 + i))
        did = f"aux{i}"
        g.add_node(did, [0.1 * (i + 1)], NodeRole.AUXILIARY)
        aux[did] = (xa, ya)
    return net, g, (x, y), aux, cfg


def test_stage2_lambda_zero_freezes_scale_bias_but_not_stats():
    # plain forward so that source batches cannot reach auxiliary entries;
    # with a zero entropy weight the auxiliary gamma/beta never move
    net, g, src, aux, cfg = trained_setup()
    cfg.lambda_entropy = 0.0
    src_entry = net.domain_params("src")
    stage2_graph(net, g, "src", src, aux, cfg, graph_forward=False)
    for did in aux:
        p = net.domain_params(did)
        for li, layer in enumerate(p.layers):
            # warm-started from source, untouched by the zero entropy term
            assert np.array_equal(layer.gamma, src_entry.layers[li].gamma)
            assert np.array_equal(layer.beta, src_entry.layers[li].beta)
            # statistics still follow the auxiliary batches
            assert not np.array_equal(layer.mu, src_entry.layers[li].mu)


def test_stage2_identical_distribution_stats_match_source():
    # an auxiliary drawn from the source distribution should end up with
    # statistics within sampling noise of the source's
    net, g, src, aux, cfg = trained_setup(seed=1, n_aux=1, n=480, shift=0.0)
    stage2_graph(net, g, "src", src, aux, cfg)
    src_p = net.domain_params("src")
    aux_p = net.domain_params("aux0")
    for ls, la in zip(src_p.layers, aux_p.layers):
        # EMA of i.i.d. batch means: sd ~ sqrt(var/b * a/(2-a)); both sides
        # fluctuate, so allow 3x the combined deviation
        sem = np.sqrt(ls.var / 16.0 * (0.1 / 1.9) * 2.0)
        assert np.all(np.abs(ls.mu - la.mu) <= 3.0 * np.maximum(sem, 1e-3))


def test_stage2_full_run_populates_every_node():
    spec_domains = 5
    net, g, src, aux, cfg = trained_setup(seed=2, n_aux=spec_domains - 1)
    stage2_graph(net, g, "src", src, aux, cfg)
    for nid, node in g.nodes.items():
        assert node.params is not None
        assert len(node.params.layers) == len(net.gbn_layers)
        for layer in node.params.layers:
            assert np.all(layer.var >= 0)


def test_stage2_loss_term_bookkeeping():
    net, g, src, aux, cfg = trained_setup(seed=3)
    log = stage2_graph(net, g, "src", src, aux, cfg)
    assert any(r.domain == "src" for r in log)
    for row in log:
        assert row.term == ("ce" if row.domain == "src" else "ent")


def test_stage2_statistics_locality():
    # changing one auxiliary's data values leaves another's statistics
    # bitwise unchanged (same domain ids and sizes -> same schedule)
    results = []
    for bump in (0.0, 5.0):
        net, g, src, aux, cfg = trained_setup(seed=4)
        aux["aux1"] = (aux["aux1"][0] + bump, aux["aux1"][1])
        stage2_graph(net, g, "src", src, aux, cfg)
        results.append(net.domain_params("aux0"))
    for la, lb in zip(results[0].layers, results[1].layers):
        assert np.array_equal(la.mu, lb.mu)
        assert np.array_equal(la.var, lb.var)


def test_stage2_single_domain_graph_forward_is_plain():
    # with no auxiliaries the graph forward degenerates: both toggles give
    # bitwise-identical trained parameters
    outs = []
    for graph_forward in (True, False):
        net, g, src, _, cfg = trained_setup(seed=5, n_aux=0)
        stage2_graph(net, g, "src", src, {}, cfg, graph_forward=graph_forward)
        outs.append(network_to_dict(net))
    assert outs[0] == outs[1]


def test_stage2_unknown_domain():
    net, g, src, aux, cfg = trained_setup(seed=6)
    aux["ghost"] = aux["aux0"]
    with pytest.raises(UnknownDomain):
        stage2_graph(net, g, "src", src, aux, cfg)
