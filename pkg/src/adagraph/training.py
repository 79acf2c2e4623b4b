"""Two-stage training: supervised source stage, then graph-aware multi-domain
stage mixing source cross-entropy with entropy on unlabeled auxiliaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network as nn
from .errors import EmptyDataset, LabelError, UnknownDomain
from .graph import DomainGraph
from .network import Network


@dataclass
class TrainConfig:
    epochs_stage1: int = 30
    epochs_stage2: int = 1
    lr_stage1: float = 0.5
    lr_stage2: float = 0.05
    batch_size: int = 16
    lambda_entropy: float = 1.0
    gbn_momentum: float = 0.1
    seed: int = 0
    update_shared_stage2: bool = False


@dataclass
class LogRow:
    step: int
    domain: str
    term: str  # "ce" or "ent"
    value: float


def iter_batches(x: np.ndarray, y, batch_size: int, rng: np.random.Generator):
    """Shuffled single-domain minibatches; partial batches below 2 are dropped."""
    n = x.shape[0]
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) < 2:
            continue
        yield x[idx], (None if y is None else y[idx])


def make_schedule(datasets: dict, batch_size: int, seed: int):
    """One epoch of (domain id, x batch, y batch) with uniformly random domain
    order per step; every batch comes from a single domain."""
    rng = np.random.default_rng(seed)
    iters = {}
    for domain in sorted(datasets):
        x, y = datasets[domain]
        if x.shape[0] == 0:
            raise EmptyDataset(domain)
        iters[domain] = iter_batches(np.asarray(x, dtype=np.float64), y,
                                     batch_size, rng)
    live = sorted(iters)
    while live:
        domain = live[int(rng.integers(len(live)))]
        try:
            xb, yb = next(iters[domain])
        except StopIteration:
            live.remove(domain)
            continue
        yield domain, xb, yb


def stage1_source(net: Network, source_domain: str, x: np.ndarray, y: np.ndarray,
                  cfg: TrainConfig) -> list[LogRow]:
    """Supervised cross-entropy training on the labeled source domain."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyDataset(source_domain)
    if y is None or np.any(np.asarray(y) < 0):
        raise LabelError("stage 1 requires labeled source samples")
    y = np.asarray(y, dtype=np.int64)
    if not net.has_domain(source_domain):
        net.add_domain(source_domain)
    log: list[LogRow] = []
    rng = np.random.default_rng(cfg.seed)
    step = 0
    for _ in range(cfg.epochs_stage1):
        for xb, yb in iter_batches(x, y, cfg.batch_size, rng):
            probs, cache = nn.forward(net, xb, source_domain, mode="train")
            loss = nn.cross_entropy(probs, yb)
            grads = nn.backward(net, cache, "cross_entropy", labels=yb)
            nn.sgd_step(net, grads, cfg.lr_stage1)
            log.append(LogRow(step, source_domain, "ce", loss))
            step += 1
    return log


def stage2_graph(net: Network, graph: DomainGraph, source_domain: str,
                 source_data, aux_data: dict, cfg: TrainConfig,
                 graph_forward: bool = True,
                 update_scale_bias: bool = True) -> list[LogRow]:
    """Graph-aware stage: single-domain batches, cross-entropy on the source,
    lambda-weighted entropy on auxiliaries; statistics stay per-domain.

    On completion every known domain's ParamSet is assigned into the graph.
    """
    source_entry = net.domain_params(source_domain)
    for domain in sorted(aux_data):
        if domain not in graph.nodes:
            raise UnknownDomain(domain)
        if not net.has_domain(domain):
            # warm start from the trained source entry
            net.add_domain(domain, init=source_entry)

    datasets = {source_domain: (np.asarray(source_data[0], dtype=np.float64),
                                np.asarray(source_data[1], dtype=np.int64))}
    for domain, (xa, _ya) in sorted(aux_data.items()):
        # auxiliary labels, if any, are stripped: training never sees them
        datasets[domain] = (np.asarray(xa, dtype=np.float64), None)

    g = graph if graph_forward else None
    log: list[LogRow] = []
    step = 0
    for epoch in range(cfg.epochs_stage2):
        schedule = make_schedule(datasets, cfg.batch_size, cfg.seed + epoch)
        for domain, xb, yb in schedule:
            probs, cache = nn.forward(net, xb, domain, graph=g, mode="train")
            if domain == source_domain:
                loss = nn.cross_entropy(probs, yb)
                grads = nn.backward(net, cache, "cross_entropy", labels=yb)
                term = "ce"
            else:
                loss = nn.entropy(probs)
                grads = nn.backward(net, cache, "entropy",
                                    scale=cfg.lambda_entropy)
                term = "ent"
                loss = cfg.lambda_entropy * loss
            nn.sgd_step(net, grads, cfg.lr_stage2,
                        update_shared=cfg.update_shared_stage2,
                        update_scale_bias=update_scale_bias)
            log.append(LogRow(step, domain, term, loss))
            step += 1

    for domain in list(datasets):
        graph.node(domain).params = net.domain_params(domain)
    return log


def accuracy(net: Network, x, y, domain: str,
             graph: DomainGraph | None = None) -> float:
    probs = nn.predict(net, np.asarray(x, dtype=np.float64), domain, graph=graph)
    return float(np.mean(probs.argmax(axis=1) == np.asarray(y)))
