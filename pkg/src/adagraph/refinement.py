"""Continuous test-time refinement of a target model from a sample buffer.

Samples arrive one by one and are classified before any update (prequential
protocol). Once the buffer fills, target statistics are blended toward the
buffer estimate (with a Bessel-corrected variance) and scale/bias take one
entropy-descent step; the buffer is then cleared.
"""

from __future__ import annotations

import numpy as np

from . import network as nn
from .errors import BufferNotReady, InvalidState
from .gbn import batch_stats
from .network import Network


def capture_activations(net: Network, x: np.ndarray, domain: str) -> list[np.ndarray]:
    """Pre-normalization activations feeding each GBN layer, eval forward."""
    x = np.asarray(x, dtype=np.float64)
    acts = []
    h = x
    for i, dense in enumerate(net.shared):
        pre = h @ dense.weight.T + dense.bias
        if i < len(net.gbn_layers):
            acts.append(pre)
            normed, _ = net.gbn_layers[i].forward(pre, domain, "eval")
            h = normed * (normed > 0)
        else:
            h = pre
    return acts


class RefinementEngine:
    """Sequential adaptation of one target domain's GBN entries."""

    def __init__(self, net: Network, target_id: str, capacity: int = 16,
                 alpha: float = 0.1, refine_lr: float = 1e-3,
                 update_stats: bool = True, update_scale_bias: bool = True):
        if not net.has_domain(target_id):
            raise InvalidState(f"target {target_id!r} has no GBN entries")
        if capacity < 2:
            raise InvalidState("buffer capacity must be >= 2")
        self.net = net
        self.target_id = target_id
        self.capacity = int(capacity)
        self.alpha = float(alpha)
        self.refine_lr = float(refine_lr)
        self.update_stats = update_stats
        self.update_scale_bias = update_scale_bias
        self.samples: list[np.ndarray] = []
        self.n_updates = 0

    # -- buffer statistics ---------------------------------------------------

    def _buffer_array(self) -> np.ndarray:
        if len(self.samples) < self.capacity:
            raise BufferNotReady(
                f"buffer holds {len(self.samples)}/{self.capacity} samples")
        return np.stack(self.samples)

    def buffer_stats(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(mu_M, var_M) per GBN layer over the buffered samples."""
        acts = capture_activations(self.net, self._buffer_array(), self.target_id)
        return [batch_stats(a) for a in acts]

    def update_target_stats(self) -> None:
        """mu <- (1-a) mu + a mu_M; var <- (1-a) var + a * |M|/(|M|-1) var_M."""
        stats = self.buffer_stats()
        bessel = self.capacity / (self.capacity - 1)
        for layer, (mu_m, var_m) in zip(self.net.gbn_layers, stats):
            e = layer.entry(self.target_id)
            e.mu = (1.0 - self.alpha) * e.mu + self.alpha * mu_m
            e.var = (1.0 - self.alpha) * e.var + self.alpha * bessel * var_m

    def refine_scale_bias(self) -> None:
        """One entropy-descent step on (gamma, beta) of the target entries;
        statistics and shared weights stay frozen."""
        x = self._buffer_array()
        probs, cache = nn.forward(self.net, x, self.target_id, mode="eval")
        grads = nn.backward(self.net, cache, "entropy")
        nn.sgd_step(self.net, grads, self.refine_lr,
                    update_shared=False, update_scale_bias=True)

    # -- stream protocol -----------------------------------------------------

    def classify(self, x) -> int:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        probs = nn.predict(self.net, x, self.target_id)
        return int(probs[0].argmax())

    def step(self, x) -> int:
        """Classify, buffer, and (when the buffer fills) update. The returned
        prediction never depends on the current or later samples' updates."""
        pred = self.classify(x)
        self.samples.append(np.asarray(x, dtype=np.float64).ravel())
        if len(self.samples) >= self.capacity:
            if self.update_stats:
                self.update_target_stats()
            if self.update_scale_bias:
                self.refine_scale_bias()
            self.samples.clear()
            self.n_updates += 1
        return pred

    def run_stream(self, xs, ys=None):
        """Prequential pass over a stream; returns (predictions, cum_acc)."""
        preds = []
        correct = 0
        cum = []
        for t, x in enumerate(xs):
            p = self.step(x)
            preds.append(p)
            if ys is not None:
                correct += int(p == int(ys[t]))
                cum.append(correct / (t + 1))
        return np.asarray(preds), (np.asarray(cum) if ys is not None else None)
