"""Graph-aware batch normalization with per-domain statistics and scale/bias.

Each layer keeps one (mu, var, gamma, beta) entry per domain. The plain
forward normalizes and scales with the entry of the sample's own domain; the
graph forward replaces scale and bias with their kernel-weighted average over
all known domains while the statistics stay strictly per-domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientBatch, UnknownDomain
from .graph import DomainGraph, LayerParams

DEFAULT_EPSILON = 1e-5


def batch_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and biased (1/N) variance of a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InsufficientBatch(f"need a nonempty 2-d batch, got shape {x.shape}")
    mu = x.mean(axis=0)
    var = np.mean((x - mu) ** 2, axis=0)
    return mu, var


@dataclass
class GbnLayer:
    """Per-domain normalization state for one layer."""

    num_channels: int
    epsilon: float = DEFAULT_EPSILON
    momentum: float = 0.1
    domains: dict[str, LayerParams] = field(default_factory=dict)

    def add_domain(self, domain: str, init: LayerParams | None = None) -> None:
        if init is not None:
            self.domains[domain] = init.copy()
        else:
            c = self.num_channels
            self.domains[domain] = LayerParams(
                mu=np.zeros(c), var=np.ones(c), gamma=np.ones(c), beta=np.zeros(c))

    def entry(self, domain: str) -> LayerParams:
        try:
            return self.domains[domain]
        except KeyError:
            raise UnknownDomain(domain) from None

    def update_batch_stats(self, domain: str, mu_hat, var_hat,
                           momentum: float | None = None) -> None:
        """Exponential update of running statistics toward the batch estimate."""
        m = self.momentum if momentum is None else momentum
        e = self.entry(domain)
        e.mu = (1.0 - m) * e.mu + m * np.asarray(mu_hat, dtype=np.float64)
        e.var = (1.0 - m) * e.var + m * np.asarray(var_hat, dtype=np.float64)

    def effective_scale_bias(self, graph: DomainGraph, domain: str):
        """Kernel-weighted mean of (gamma, beta) over every graph node.

        Returns (gamma_g, beta_g, [(domain id, normalized weight), ...]); the
        weight list drives gradient distribution in the backward pass.
        """
        own = self.entry(domain)
        node = graph.node(domain)
        ids = sorted(graph.nodes)
        raw = np.array([graph.edge_weight(node.id, k) for k in ids])
        norm = raw / raw.sum()
        # accumulate as deviations from the node's own entry: since the
        # weights sum to 1, this equals the weighted mean but is exact (down
        # to the bit) when every node shares the same gamma/beta
        gamma_g = own.gamma.astype(np.float64, copy=True)
        beta_g = own.beta.astype(np.float64, copy=True)
        for k, w in zip(ids, norm):
            e = self.entry(k)
            gamma_g += w * (e.gamma - own.gamma)
            beta_g += w * (e.beta - own.beta)
        return gamma_g, beta_g, list(zip(ids, norm.tolist()))

    def forward(self, x: np.ndarray, domain: str, mode: str,
                graph: DomainGraph | None = None, update_stats: bool = True):
        """Normalize a batch for one domain.

        mode "train" normalizes with current-batch statistics (and, when
        update_stats, folds them into the running estimate); "eval" uses the
        stored running statistics. With a graph, scale and bias come from
        effective_scale_bias. Returns (out, cache) where cache feeds backward.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.num_channels:
            raise InsufficientBatch(
                f"expected (N, {self.num_channels}) batch, got {x.shape}")
        e = self.entry(domain)
        if mode == "train":
            if x.shape[0] < 2:
                raise InsufficientBatch(
                    f"train-mode batch needs >= 2 samples, got {x.shape[0]}")
            mu, var = batch_stats(x)
        elif mode == "eval":
            mu, var = e.mu, e.var
        else:
            raise ValueError(f"unknown mode {mode!r}")

        if graph is not None:
            gamma, beta, weights = self.effective_scale_bias(graph, domain)
        else:
            gamma, beta, weights = e.gamma, e.beta, [(domain, 1.0)]

        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        x_hat = (x - mu) * inv_std
        out = gamma * x_hat + beta

        if mode == "train" and update_stats:
            self.update_batch_stats(domain, mu, var)

        cache = {"x_hat": x_hat, "inv_std": inv_std, "gamma": gamma,
                 "mode": mode, "weights": weights}
        return out, cache

    def backward(self, dout: np.ndarray, cache: dict):
        """Gradients through forward.

        Returns (dx, grads) with grads mapping domain id -> (dgamma, dbeta),
        split across contributing domains by the cached normalized weights.
        Running statistics receive no gradient.
        """
        x_hat = cache["x_hat"]
        inv_std = cache["inv_std"]
        gamma = cache["gamma"]
        dgamma_eff = np.sum(dout * x_hat, axis=0)
        dbeta_eff = np.sum(dout, axis=0)
        dx_hat = dout * gamma
        if cache["mode"] == "train":
            n = dout.shape[0]
            dx = (inv_std / n) * (
                n * dx_hat
                - dx_hat.sum(axis=0)
                - x_hat * np.sum(dx_hat * x_hat, axis=0))
        else:
            dx = dx_hat * inv_std
        grads = {k: (w * dgamma_eff, w * dbeta_eff) for k, w in cache["weights"]}
        return dx, grads
