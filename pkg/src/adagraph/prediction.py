"""Target-model synthesis: metadata-driven propagation and image-driven
mixtures through a domain classifier."""

from __future__ import annotations

import numpy as np

from . import network as nn
from .errors import DegenerateTask, NodeSetMismatch
from .graph import DomainGraph, NodeRole, ParamSet, combine_paramsets
from .network import Network
from .training import TrainConfig, stage1_source


def predict_from_metadata(graph: DomainGraph, net: Network, metadata,
                          target_id: str = "target") -> str:
    """Instantiate a virtual target node and regress its parameters.

    The propagated ParamSet is installed into every GBN layer under
    target_id; subsequent eval-mode forwards for that id should use the
    graph-combined forward. Returns the target id.
    """
    if target_id not in graph.nodes:
        graph.add_virtual_node(target_id, metadata)
    params = graph.propagate_params(target_id)
    net.set_domain_params(target_id, params)
    return target_id


def predict_target(graph: DomainGraph, net: Network, x,
                   target_id: str = "target") -> np.ndarray:
    """Eval forward for an instantiated target through the graph-combined
    scale/bias, as done at test time with metadata available."""
    return nn.predict(net, np.asarray(x, dtype=np.float64), target_id,
                      graph=graph)


def train_metadata_classifier(data: dict, cfg: TrainConfig | None = None,
                              hidden: int = 32) -> tuple[Network, list[str]]:
    """Train a domain classifier on pooled samples from all known domains.

    data maps domain id -> (x, _). Returns (classifier, class order); class i
    corresponds to the i-th domain id in ascending order.
    """
    if len(data) < 2:
        raise DegenerateTask("metadata classifier needs >= 2 domains")
    cfg = cfg if cfg is not None else TrainConfig()
    ids = sorted(data)
    xs, ys = [], []
    for i, domain in enumerate(ids):
        x = np.asarray(data[domain][0], dtype=np.float64)
        xs.append(x)
        ys.append(np.full(x.shape[0], i, dtype=np.int64))
    x_all = np.concatenate(xs)
    y_all = np.concatenate(ys)
    rng = np.random.default_rng(cfg.seed)
    clf = Network.create(x_all.shape[1], hidden, len(ids), rng=rng)
    stage1_source(clf, "_pooled", x_all, y_all, cfg)
    return clf, ids


def domain_mixture(clf: Network, class_ids: list[str], x: np.ndarray) -> dict:
    """p(v|x) over known domains for a single sample."""
    probs = nn.predict(clf, x.reshape(1, -1), "_pooled")[0]
    return dict(zip(class_ids, probs.tolist()))


def mixture_params(graph: DomainGraph, weights: dict) -> ParamSet:
    """theta_x = sum_v p(v|x) psi(v) over the known (non-virtual) domains."""
    known = [nid for nid, n in sorted(graph.nodes.items())
             if n.role is not NodeRole.VIRTUAL and n.params is not None]
    if set(weights) != set(known):
        raise NodeSetMismatch(
            f"classifier classes {sorted(weights)} != graph domains {known}")
    return combine_paramsets([graph.nodes[nid].params for nid in known],
                             [weights[nid] for nid in known])


def predict_from_image(graph: DomainGraph, net: Network, clf: Network,
                       class_ids: list[str], x) -> np.ndarray:
    """Per-image model synthesis: infer p(v|x), mix parameters, classify with
    a plain eval forward."""
    x = np.asarray(x, dtype=np.float64).ravel()
    weights = domain_mixture(clf, class_ids, x)
    params = mixture_params(graph, weights)
    net.set_domain_params("_image_mix", params)
    return nn.predict(net, x.reshape(1, -1), "_image_mix")[0]
