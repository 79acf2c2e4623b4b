"""Built-in invariant suite: gradient checks and oracle equivalences, runnable
without pytest via the `selftest` subcommand."""

from __future__ import annotations

import numpy as np

from . import gradcheck
from . import network as nn
from .graph import DomainGraph, NodeRole, ParamSet, LayerParams
from .network import Network


def _random_network(rng: np.random.Generator, n_domains: int = 3,
                    input_dim: int = 3, hidden: int = 8, classes: int = 4):
    net = Network.create(input_dim, hidden, classes, rng=rng)
    g = DomainGraph(2)
    roles = [NodeRole.SOURCE] + [NodeRole.AUXILIARY] * (n_domains - 1)
    for i, role in enumerate(roles):
        d = f"d{i}"
        net.add_domain(d)
        g.add_node(d, rng.uniform(0, 1, 2), role)
        for layer in net.gbn_layers:
            e = layer.entry(d)
            e.gamma = rng.normal(1.0, 0.2, hidden)
            e.beta = rng.normal(0.0, 0.2, hidden)
            e.mu = rng.normal(0.0, 0.2, hidden)
            e.var = rng.uniform(0.5, 1.5, hidden)
    return net, g


def check_gradients(n_seeds: int = 20, tol: float = 1e-4) -> list[str]:
    failures = []
    for seed in range(n_seeds):
        rng = np.random.default_rng(seed)
        net, g = _random_network(rng)
        x = rng.normal(size=(8, 3))
        y = rng.integers(0, 4, size=8)
        for graph in (None, g):
            for loss in ("cross_entropy", "entropy"):
                err = gradcheck.check_network_gradients(
                    net, x, "d1", loss, labels=y, graph=graph)
                if err > tol:
                    failures.append(
                        f"gradcheck seed={seed} graph={graph is not None} "
                        f"loss={loss}: rel err {err:.2e} > {tol}")
    return failures


def check_propagation_oracle(n_graphs: int = 50, tol: float = 1e-12) -> list[str]:
    failures = []
    for seed in range(n_graphs):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 10))
        dim = int(rng.integers(1, 4))
        g = DomainGraph(dim)
        for i in range(n):
            params = ParamSet([LayerParams(*(rng.normal(size=4) for _ in range(3)),
                                           rng.normal(size=4))])
            params.layers[0].var = np.abs(params.layers[0].var)
            role = NodeRole.SOURCE if i == 0 else NodeRole.AUXILIARY
            g.add_node(f"d{i}", rng.uniform(0, 1, dim), role, params)
        t = g.add_virtual_node("t", rng.uniform(0, 1, dim))
        got = g.propagate_params("t")
        # independent loop
        num = np.zeros(4)
        den = 0.0
        for i in range(n):
            node = g.nodes[f"d{i}"]
            w = np.exp(-np.sum((t.metadata - node.metadata) ** 2)
                       / (2 * g.kernel.sigma))
            num = num + w * node.params.layers[0].gamma
            den += w
        expect = num / den
        err = np.max(np.abs(got.layers[0].gamma - expect)
                     / np.maximum(np.abs(expect), 1e-12))
        if err > tol:
            failures.append(f"propagation oracle seed={seed}: rel err {err:.2e}")
    return failures


def check_bn_normalization(n_batches: int = 50) -> list[str]:
    failures = []
    rng = np.random.default_rng(7)
    from .gbn import GbnLayer
    for i in range(n_batches):
        layer = GbnLayer(5)
        layer.add_domain("d")
        x = rng.normal(rng.uniform(-3, 3), rng.uniform(0.5, 3), size=(32, 5))
        out, cache = layer.forward(x, "d", "train")
        m = np.abs(cache["x_hat"].mean(axis=0)).max()
        v = np.abs(cache["x_hat"].var(axis=0) - 1).max()
        if m > 1e-6 or v > 1e-4:
            failures.append(f"bn normalization batch={i}: mean {m:.2e} var {v:.2e}")
    return failures


def run_selftest() -> int:
    checks = [
        ("gradient suite", check_gradients),
        ("propagation oracle", check_propagation_oracle),
        ("bn normalization", check_bn_normalization),
    ]
    any_failed = False
    for name, fn in checks:
        failures = fn()
        status = "ok" if not failures else "FAIL"
        print(f"[{status}] {name}")
        for f in failures:
            print(f"    {f}")
        any_failed = any_failed or bool(failures)
    return 1 if any_failed else 0
