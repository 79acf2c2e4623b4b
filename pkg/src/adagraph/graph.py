"""Domain graph: metadata kernel, virtual nodes and parameter propagation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    DuplicateNode,
    EmptyGraphError,
    InvalidMetadata,
    UnknownDomain,
)


def as_metadata(values) -> np.ndarray:
    """Validate and return a metadata vector as a float64 array."""
    m = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(m)):
        raise InvalidMetadata(f"non-finite metadata component in {m!r}")
    return m


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian-style kernel on metadata: d(a, b) = ||a - b||^2 / (2 * sigma)."""

    sigma: float = 0.1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")


def metadata_distance(a, b, kernel: KernelConfig) -> float:
    """Squared euclidean distance between metadata vectors, scaled by 1/(2 sigma)."""
    a = as_metadata(a)
    b = as_metadata(b)
    if a.shape != b.shape:
        raise DimensionError(f"metadata lengths differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff) / (2.0 * kernel.sigma)


class NodeRole(Enum):
    SOURCE = "source"
    AUXILIARY = "auxiliary"
    VIRTUAL = "virtual"


@dataclass
class LayerParams:
    """Per-layer normalization parameters: statistics plus scale and bias."""

    mu: np.ndarray
    var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray

    def copy(self) -> "LayerParams":
        return LayerParams(self.mu.copy(), self.var.copy(),
                           self.gamma.copy(), self.beta.copy())


FIELDS = ("mu", "var", "gamma", "beta")


@dataclass
class ParamSet:
    """Domain-specific parameters: one LayerParams per normalization layer."""

    layers: list[LayerParams]

    def copy(self) -> "ParamSet":
        return ParamSet([l.copy() for l in self.layers])

    def scaled(self, w: float) -> "ParamSet":
        return ParamSet([LayerParams(*(w * getattr(l, f) for f in FIELDS))
                         for l in self.layers])

    def add_scaled(self, other: "ParamSet", w: float) -> None:
        for mine, theirs in zip(self.layers, other.layers):
            for f in FIELDS:
                getattr(mine, f).__iadd__(w * getattr(theirs, f))

    def to_dict(self) -> dict:
        return {"layers": [{f: getattr(l, f).tolist() for f in FIELDS}
                           for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamSet":
        return cls([LayerParams(*(np.asarray(layer[f], dtype=np.float64)
                                  for f in FIELDS))
                    for layer in d["layers"]])


def combine_paramsets(params: list[ParamSet], weights) -> ParamSet:
    """Weighted average of parameter sets, applied field by field."""
    weights = np.asarray(weights, dtype=np.float64)
    out = params[0].scaled(weights[0])
    for p, w in zip(params[1:], weights[1:]):
        out.add_scaled(p, w)
    return out


@dataclass
class DomainNode:
    id: str
    metadata: np.ndarray
    role: NodeRole
    params: ParamSet | None = None


class DomainGraph:
    """Complete weighted graph over domains keyed by metadata similarity.

    Edge weights follow omega(a, b) = exp(-d(m_a, m_b)); virtual nodes carry
    metadata but no data-derived parameters and receive them by propagation.
    """

    def __init__(self, metadata_dim: int, kernel: KernelConfig | None = None,
                 min_weight: float = 0.0):
        self.metadata_dim = int(metadata_dim)
        self.kernel = kernel if kernel is not None else KernelConfig()
        self.min_weight = float(min_weight)
        self.nodes: dict[str, DomainNode] = {}

    def add_node(self, node_id: str, metadata, role: NodeRole,
                 params: ParamSet | None = None) -> DomainNode:
        if node_id in self.nodes:
            raise DuplicateNode(node_id)
        m = as_metadata(metadata)
        if m.shape != (self.metadata_dim,):
            raise DimensionError(
                f"metadata length {m.shape[0]} != graph dimension {self.metadata_dim}")
        node = DomainNode(node_id, m, role, params)
        self.nodes[node_id] = node
        return node

    def add_virtual_node(self, node_id: str, metadata) -> DomainNode:
        return self.add_node(node_id, metadata, NodeRole.VIRTUAL)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def node(self, node_id: str) -> DomainNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownDomain(node_id) from None

    def edge_weight(self, a: str, b: str) -> float:
        d = metadata_distance(self.node(a).metadata, self.node(b).metadata,
                              self.kernel)
        return float(np.exp(-d))

    def _contributors(self, target_id: str) -> list[DomainNode]:
        # Only non-virtual nodes with data-derived params contribute; the
        # target itself never votes for its own parameters.
        out = [n for nid, n in sorted(self.nodes.items())
               if nid != target_id
               and n.role is not NodeRole.VIRTUAL
               and n.params is not None]
        if not out:
            raise EmptyGraphError(f"no parameterized neighbors for {target_id!r}")
        return out

    def node_weights(self, target_id: str) -> list[tuple[str, float]]:
        """Normalized propagation weights, ascending node id."""
        target = self.node(target_id)
        contributors = self._contributors(target_id)
        raw = np.array([self.edge_weight(target.id, n.id) for n in contributors])
        if self.min_weight > 0.0:
            keep = raw > self.min_weight
            if not np.any(keep):
                raise EmptyGraphError(
                    f"min_weight={self.min_weight} filters out every neighbor")
            contributors = [n for n, k in zip(contributors, keep) if k]
            raw = raw[keep]
        norm = raw / raw.sum()
        return [(n.id, float(w)) for n, w in zip(contributors, norm)]

    def propagate_params(self, target_id: str) -> ParamSet:
        """Kernel-weighted average of neighbor parameters, assigned to the target."""
        weights = self.node_weights(target_id)
        params = combine_paramsets([self.nodes[nid].params for nid, _ in weights],
                                   [w for _, w in weights])
        self.node(target_id).params = params
        return params

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "metadata_dim": self.metadata_dim,
            "sigma": self.kernel.sigma,
            "nodes": [
                {
                    "id": n.id,
                    "role": n.role.value,
                    "metadata": n.metadata.tolist(),
                    "params": None if n.params is None else n.params.to_dict(),
                }
                for _, n in sorted(self.nodes.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainGraph":
        g = cls(d["metadata_dim"], KernelConfig(sigma=d["sigma"]))
        for nd in d["nodes"]:
            params = None if nd["params"] is None else ParamSet.from_dict(nd["params"])
            g.add_node(nd["id"], nd["metadata"], NodeRole(nd["role"]), params)
        return g

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "DomainGraph":
        return cls.from_dict(json.loads(s))
