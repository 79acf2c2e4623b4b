"""Dense feedforward classifier with interleaved graph-BN layers.

Layout: input -> dense(h) -> GBN -> relu -> ... -> dense(|Y|) -> softmax.
Forward/backward are hand-rolled over float64 numpy arrays; gradients reach
the shared dense parameters and every per-domain (gamma, beta) that received
weight through the graph-combined scale/bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, LabelError
from .gbn import GbnLayer
from .graph import DomainGraph, LayerParams, ParamSet

LOG_CLAMP = 1e-12


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)


@dataclass
class Gradients:
    """Gradient container mirroring the parameter layout."""

    dense: list[tuple[np.ndarray, np.ndarray]]           # (dW, db) per layer
    gbn: list[dict[str, tuple[np.ndarray, np.ndarray]]]  # per layer: id -> (dgamma, dbeta)


@dataclass
class Network:
    shared: list[DenseLayer]
    gbn_layers: list[GbnLayer]
    num_classes: int

    @classmethod
    def create(cls, input_dim: int, hidden: int, num_classes: int,
               n_hidden_layers: int = 2, rng: np.random.Generator | None = None,
               init_scale: float = 0.5, epsilon: float = 1e-5,
               momentum: float = 0.1) -> "Network":
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = [input_dim] + [hidden] * n_hidden_layers + [num_classes]
        shared = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            w = rng.normal(0.0, init_scale / np.sqrt(d_in), size=(d_out, d_in))
            shared.append(DenseLayer(weight=w, bias=np.zeros(d_out)))
        gbn = [GbnLayer(hidden, epsilon=epsilon, momentum=momentum)
               for _ in range(n_hidden_layers)]
        return cls(shared=shared, gbn_layers=gbn, num_classes=num_classes)

    def add_domain(self, domain: str, init: ParamSet | None = None) -> None:
        for i, layer in enumerate(self.gbn_layers):
            layer.add_domain(domain, init.layers[i] if init is not None else None)

    def has_domain(self, domain: str) -> bool:
        return all(domain in l.domains for l in self.gbn_layers)

    def domain_params(self, domain: str) -> ParamSet:
        """Snapshot of the per-layer normalization entries for one domain."""
        return ParamSet([l.entry(domain).copy() for l in self.gbn_layers])

    def set_domain_params(self, domain: str, params: ParamSet) -> None:
        for layer, p in zip(self.gbn_layers, params.layers):
            layer.domains[domain] = p.copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(net: Network, x: np.ndarray, domain: str,
            graph: DomainGraph | None = None, mode: str = "eval",
            update_stats: bool = True):
    """Full forward pass; returns (probs, cache) with cache feeding backward."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.shared[0].weight.shape[1]:
        raise DimensionError(
            f"expected (N, {net.shared[0].weight.shape[1]}) input, got {x.shape}")
    caches = []
    h = x
    for i, dense in enumerate(net.shared):
        pre = h @ dense.weight.T + dense.bias
        entry = {"dense_in": h}
        if i < len(net.gbn_layers):
            normed, gbn_cache = net.gbn_layers[i].forward(
                pre, domain, mode, graph=graph, update_stats=update_stats)
            mask = normed > 0
            h = normed * mask
            entry.update(gbn=gbn_cache, relu_mask=mask)
        else:
            h = pre
        caches.append(entry)
    probs = softmax(h)
    return probs, {"layers": caches, "probs": probs}


def cross_entropy(probs: np.ndarray, labels) -> float:
    """Mean negative log-likelihood of the true labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise LabelError(f"label out of range [0, {probs.shape[1]})")
    p = np.maximum(probs[np.arange(len(labels)), labels], LOG_CLAMP)
    return float(-np.mean(np.log(p)))


def entropy(probs: np.ndarray) -> float:
    """Mean per-sample prediction entropy."""
    logp = np.log(np.maximum(probs, LOG_CLAMP))
    return float(-np.mean(np.sum(probs * logp, axis=1)))


def _dlogits_cross_entropy(probs: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.shape[0]
    d = probs.copy()
    d[np.arange(n), labels] -= 1.0
    return d / n


def _dlogits_entropy(probs: np.ndarray) -> np.ndarray:
    n = probs.shape[0]
    logp = np.log(np.maximum(probs, LOG_CLAMP))
    per_sample_h = -np.sum(probs * logp, axis=1, keepdims=True)
    return -probs * (logp + per_sample_h) / n


def backward(net: Network, cache: dict, loss: str, labels=None,
             scale: float = 1.0) -> Gradients:
    """Gradients of a scalar loss ("cross_entropy" or "entropy") times scale.

    Per-domain gamma/beta gradients are reported for every domain that
    received weight through the graph-combined forward; running statistics
    get no gradient.
    """
    probs = cache["probs"]
    if loss == "cross_entropy":
        if labels is None:
            raise LabelError("cross_entropy backward needs labels")
        dh = _dlogits_cross_entropy(probs, labels)
    elif loss == "entropy":
        dh = _dlogits_entropy(probs)
    else:
        raise ValueError(f"unknown loss {loss!r}")
    dh = dh * scale

    dense_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.shared)
    gbn_grads: list[dict] = [None] * len(net.gbn_layers)
    for i in range(len(net.shared) - 1, -1, -1):
        entry = cache["layers"][i]
        if i < len(net.gbn_layers):
            dnormed = dh * entry["relu_mask"]
            dpre, grads = net.gbn_layers[i].backward(dnormed, entry["gbn"])
            gbn_grads[i] = grads
        else:
            dpre = dh
        x_in = entry["dense_in"]
        dense_grads[i] = (dpre.T @ x_in, dpre.sum(axis=0))
        dh = dpre @ net.shared[i].weight
    return Gradients(dense=dense_grads, gbn=gbn_grads)


def sgd_step(net: Network, grads: Gradients, lr: float,
             update_shared: bool = True, update_scale_bias: bool = True) -> None:
    """In-place p <- p - lr * g over all tracked parameters."""
    if update_shared:
        for dense, (dw, db) in zip(net.shared, grads.dense):
            if dw.shape != dense.weight.shape or db.shape != dense.bias.shape:
                raise DimensionError("gradient shape mismatch")
            dense.weight -= lr * dw
            dense.bias -= lr * db
    if update_scale_bias:
        for layer, layer_grads in zip(net.gbn_layers, grads.gbn):
            if layer_grads is None:
                continue
            for domain, (dgamma, dbeta) in layer_grads.items():
                e = layer.entry(domain)
                e.gamma = e.gamma - lr * dgamma
                e.beta = e.beta - lr * dbeta


def predict(net: Network, x: np.ndarray, domain: str,
            graph: DomainGraph | None = None) -> np.ndarray:
    """Eval-mode class probabilities."""
    probs, _ = forward(net, x, domain, graph=graph, mode="eval")
    return probs


# -- serialization -----------------------------------------------------------

def network_to_dict(net: Network) -> dict:
    return {
        "num_classes": net.num_classes,
        "shared": [{"weight": l.weight.tolist(), "bias": l.bias.tolist()}
                   for l in net.shared],
        "gbn": [
            {
                "num_channels": l.num_channels,
                "epsilon": l.epsilon,
                "momentum": l.momentum,
                "domains": {
                    k: {f: getattr(e, f).tolist()
                        for f in ("mu", "var", "gamma", "beta")}
                    for k, e in sorted(l.domains.items())
                },
            }
            for l in net.gbn_layers
        ],
    }


def network_from_dict(d: dict) -> Network:
    shared = [DenseLayer(np.asarray(l["weight"], dtype=np.float64),
                         np.asarray(l["bias"], dtype=np.float64))
              for l in d["shared"]]
    gbn = []
    for ld in d["gbn"]:
        layer = GbnLayer(ld["num_channels"], epsilon=ld["epsilon"],
                         momentum=ld["momentum"])
        for k, e in ld["domains"].items():
            layer.domains[k] = LayerParams(
                *(np.asarray(e[f], dtype=np.float64)
                  for f in ("mu", "var", "gamma", "beta")))
        gbn.append(layer)
    return Network(shared=shared, gbn_layers=gbn, num_classes=d["num_classes"])
