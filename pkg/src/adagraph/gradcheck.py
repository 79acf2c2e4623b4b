"""Central finite-difference checking of the hand-rolled backward pass."""

from __future__ import annotations

import numpy as np

from . import network as nn
from .graph import DomainGraph
from .network import Network


def _loss_value(net: Network, x, domain, graph, loss, labels):
    # update_stats=False: finite differencing must not mutate running stats
    probs, _ = nn.forward(net, x, domain, graph=graph, mode="train",
                          update_stats=False)
    if loss == "cross_entropy":
        return nn.cross_entropy(probs, labels)
    return nn.entropy(probs)


def _numeric(param: np.ndarray, f, h: float) -> np.ndarray:
    g = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = param[idx]
        param[idx] = orig + h
        fp = f()
        param[idx] = orig - h
        fm = f()
        param[idx] = orig
        g[idx] = (fp - fm) / (2.0 * h)
        it.iternext()
    return g


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_network_gradients(net: Network, x: np.ndarray, domain: str,
                            loss: str, labels=None,
                            graph: DomainGraph | None = None,
                            h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients
    over all dense weights/biases and all per-domain gamma/beta."""
    probs, cache = nn.forward(net, x, domain, graph=graph, mode="train",
                              update_stats=False)
    grads = nn.backward(net, cache, loss, labels=labels)
    f = lambda: _loss_value(net, x, domain, graph, loss, labels)

    worst = 0.0
    for dense, (dw, db) in zip(net.shared, grads.dense):
        worst = max(worst, max_relative_error(dw, _numeric(dense.weight, f, h)))
        worst = max(worst, max_relative_error(db, _numeric(dense.bias, f, h)))
    for layer, layer_grads in zip(net.gbn_layers, grads.gbn):
        for k in sorted(layer.domains):
            e = layer.entry(k)
            dgamma, dbeta = layer_grads.get(k, (np.zeros_like(e.gamma),
                                                np.zeros_like(e.beta)))
            worst = max(worst, max_relative_error(dgamma, _numeric(e.gamma, f, h)))
            worst = max(worst, max_relative_error(dbeta, _numeric(e.beta, f, h)))
    return worst


def check_input_gradient(net: Network, x: np.ndarray, domain: str, loss: str,
                         labels=None, graph: DomainGraph | None = None,
                         h: float = 1e-5) -> float:
    """Max relative error of the gradient w.r.t. the input batch itself."""
    x = np.array(x, dtype=np.float64)
    probs, cache = nn.forward(net, x, domain, graph=graph, mode="train",
                              update_stats=False)
    dx = _input_grad(net, cache, loss, labels)
    f = lambda: _loss_value(net, x, domain, graph, loss, labels)
    return max_relative_error(dx, _numeric(x, f, h))


def _input_grad(net: Network, cache: dict, loss: str, labels):
    probs = cache["probs"]
    if loss == "cross_entropy":
        dh = nn._dlogits_cross_entropy(probs, labels)
    else:
        dh = nn._dlogits_entropy(probs)
    for i in range(len(net.shared) - 1, -1, -1):
        entry = cache["layers"][i]
        if i < len(net.gbn_layers):
            dnormed = dh * entry["relu_mask"]
            dpre, _ = net.gbn_layers[i].backward(dnormed, entry["gbn"])
        else:
            dpre = dh
        dh = dpre @ net.shared[i].weight
    return dh
