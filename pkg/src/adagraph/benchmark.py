"""Synthetic multi-domain benchmarks and the two experimental protocols:
leave-one-out predictive adaptation and sequential continuous adaptation."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from . import network as nn
from .errors import ConfigError
from .graph import DomainGraph, KernelConfig, NodeRole
from .network import Network
from .prediction import predict_from_metadata, predict_target
from .refinement import RefinementEngine
from .training import TrainConfig, accuracy, stage1_source, stage2_graph

VARIANTS = ("baseline", "baseline_refine", "adagraph_bn", "adagraph_sb",
            "adagraph_full", "adagraph_refine", "da_upper_bound")
CONTINUOUS_VARIANTS = ("baseline", "refine_stats", "refine_full")


@dataclass
class DomainFamilySpec:
    base_dataset: str = "two_moons"   # or "gaussian_quad"
    n_domains: int = 18
    samples_per_domain: int = 300
    noise_std: float = 0.1
    translation: float = 0.0          # optional second metadata component
    seed: int = 0

    def __post_init__(self):
        if self.base_dataset not in ("two_moons", "gaussian_quad"):
            raise ConfigError(f"unknown base_dataset {self.base_dataset!r}")
        if self.n_domains < 3:
            raise ConfigError("need n_domains >= 3")
        if self.noise_std <= 0:
            raise ConfigError("noise_std must be positive")


@dataclass
class ResultRow:
    source: str
    target: str
    variant: str
    seed: int
    accuracy: float
    wall_time_s: float


# Crescent geometry: two 300-degree arcs at distinct radii around a common
# center that sits off the rotation origin. The radial class code keeps the
# task solvable under rotation while the figure's revolving position makes
# the domain shift show up in feature statistics.
MOON_OUTER_RADIUS = 1.4
MOON_INNER_RADIUS = 0.5
MOON_SPAN_DEG = 300.0
MOON_PHASE_DEG = 120.0
MOON_CENTER = np.array([0.45, 0.0])


def two_moons(n: int, noise: float, rng: np.random.Generator):
    """Two interleaving crescent arcs; the outer moon is class 0."""
    n0 = n // 2
    n1 = n - n0
    t0 = np.deg2rad(rng.uniform(0.0, MOON_SPAN_DEG, n0))
    t1 = np.deg2rad(rng.uniform(MOON_PHASE_DEG, MOON_PHASE_DEG + MOON_SPAN_DEG, n1))
    x0 = MOON_OUTER_RADIUS * np.stack([np.cos(t0), np.sin(t0)], axis=1)
    x1 = MOON_INNER_RADIUS * np.stack([np.cos(t1), np.sin(t1)], axis=1)
    x = np.concatenate([x0, x1]) + rng.normal(0.0, noise, size=(n, 2)) + MOON_CENTER
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return x, y


def gaussian_quad(n: int, noise: float, rng: np.random.Generator):
    """Four gaussian blobs, one per quadrant, classes 0..3."""
    centers = MOON_CENTER + 0.8 * np.array(
        [[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=np.float64)
    y = rng.integers(0, 4, size=n)
    x = centers[y] + rng.normal(0.0, noise, size=(n, 2))
    return x, y.astype(np.int64)

BASE_GENERATORS = {"two_moons": two_moons, "gaussian_quad": gaussian_quad}


def rotate(x: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate points about the origin."""
    a = np.deg2rad(angle_deg)
    r = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    return x @ r.T


def transform(x: np.ndarray, metadata: np.ndarray) -> np.ndarray:
    """Apply the metadata-indexed transform: rotation (component 1, angle/360)
    plus an optional rightward translation (component 2)."""
    out = rotate(x, 360.0 * metadata[0])
    if metadata.shape[0] > 1:
        out = out + np.array([metadata[1], 0.0])
    return out


def domain_ids(spec: DomainFamilySpec) -> list[str]:
    return [f"d{i:02d}" for i in range(spec.n_domains)]


def domain_metadata(spec: DomainFamilySpec, index: int) -> np.ndarray:
    angle = index * 360.0 / spec.n_domains
    m = [angle / 360.0]
    if spec.translation > 0.0:
        m.append(spec.translation * index / max(spec.n_domains - 1, 1))
    return np.array(m)


def domain_angle(spec: DomainFamilySpec, domain: str) -> float:
    return int(domain[1:]) * 360.0 / spec.n_domains


def angular_distance(a_deg: float, b_deg: float) -> float:
    d = abs(a_deg - b_deg) % 360.0
    return min(d, 360.0 - d)


def generate_domain(spec: DomainFamilySpec, index: int):
    """One domain's (x, y, metadata); seeding is per-domain so that removing
    any other domain leaves this one bitwise unchanged."""
    rng = np.random.default_rng([spec.seed, index])
    gen = BASE_GENERATORS[spec.base_dataset]
    x, y = gen(spec.samples_per_domain, spec.noise_std, rng)
    m = domain_metadata(spec, index)
    return transform(x, m), y, m


def generate_family(spec: DomainFamilySpec) -> dict:
    """Map domain id -> (x, y, metadata)."""
    return {did: generate_domain(spec, i)
            for i, did in enumerate(domain_ids(spec))}


def num_classes(spec: DomainFamilySpec) -> int:
    return 2 if spec.base_dataset == "two_moons" else 4


# -- leave-one-out PDA protocol ---------------------------------------------

_VARIANT_TOGGLES = {
    # variant: (run stage2, graph forward in stage2, update scale/bias)
    "adagraph_bn": (True, True, False),
    "adagraph_sb": (True, False, True),
    "adagraph_full": (True, True, True),
    "adagraph_refine": (True, True, True),
    "da_upper_bound": (True, True, True),
}


def build_network(spec: DomainFamilySpec, cfg: TrainConfig, hidden: int = 32):
    rng = np.random.default_rng(cfg.seed)
    return Network.create(2, hidden, num_classes(spec), rng=rng,
                          momentum=cfg.gbn_momentum)


def train_source_model(spec: DomainFamilySpec, source: str, cfg: TrainConfig,
                       family=None) -> Network:
    family = family if family is not None else generate_family(spec)
    xs, ys, _ = family[source]
    net = build_network(spec, cfg)
    stage1_source(net, source, xs, ys, cfg)
    return net


def run_pda(spec: DomainFamilySpec, variant: str, source: str, target: str,
            cfg: TrainConfig, kernel: KernelConfig | None = None,
            refine_capacity: int = 16, refine_alpha: float = 0.1,
            refine_lr: float = 1e-3, stage1_net: Network | None = None,
            family: dict | None = None, capture: dict | None = None) -> ResultRow:
    """One leave-one-out experiment: train without any target data, predict
    the target model, evaluate on the full target set (prequentially for the
    refinement variants)."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}")
    if source == target:
        raise ConfigError("source and target must differ")
    t0 = time.perf_counter()
    kernel = kernel if kernel is not None else KernelConfig()
    family = family if family is not None else generate_family(spec)
    x_t, y_t, m_t = family[target]

    net = (copy.deepcopy(stage1_net) if stage1_net is not None
           else train_source_model(spec, source, cfg, family))
    if capture is not None:
        capture.update(net=net, graph=None, log=[], aux_data=None)

    if variant == "baseline":
        acc = accuracy(net, x_t, y_t, source)
    elif variant == "baseline_refine":
        net.add_domain("target", init=net.domain_params(source))
        acc = _prequential_accuracy(net, x_t, y_t, spec.seed + cfg.seed,
                                    refine_capacity, refine_alpha, refine_lr)
    else:
        upper = variant == "da_upper_bound"
        _, graph_fwd, scale_bias = _VARIANT_TOGGLES[variant]
        graph = DomainGraph(m_t.shape[0], kernel)
        graph.add_node(source, family[source][2], NodeRole.SOURCE)
        aux_data = {}
        for did, (xa, ya, ma) in sorted(family.items()):
            if did in (source, target):
                continue
            graph.add_node(did, ma, NodeRole.AUXILIARY)
            aux_data[did] = (xa, ya)
        if upper:
            # the upper bound may use unlabeled target data as an auxiliary
            graph.add_node(target, m_t, NodeRole.AUXILIARY)
            aux_data[target] = (x_t, None)
        log = stage2_graph(net, graph, source, family[source][:2], aux_data, cfg,
                           graph_forward=graph_fwd, update_scale_bias=scale_bias)
        if capture is not None:
            capture.update(graph=graph, log=log,
                           aux_data={d: v for d, v in aux_data.items()
                                     if d != target})
        if upper:
            acc = accuracy(net, x_t, y_t, target, graph=graph)
        else:
            predict_from_metadata(graph, net, m_t, target_id="target")
            if variant == "adagraph_refine":
                acc = _prequential_accuracy(net, x_t, y_t, spec.seed + cfg.seed,
                                            refine_capacity, refine_alpha,
                                            refine_lr)
            else:
                acc = float(np.mean(
                    predict_target(graph, net, x_t).argmax(axis=1) == y_t))
    return ResultRow(source, target, variant, cfg.seed, acc,
                     time.perf_counter() - t0)


def _prequential_accuracy(net, x_t, y_t, seed, capacity, alpha, lr) -> float:
    order = np.random.default_rng(seed).permutation(len(x_t))
    engine = RefinementEngine(net, "target", capacity=capacity, alpha=alpha,
                              refine_lr=lr)
    preds, cum = engine.run_stream(x_t[order], y_t[order])
    return float(cum[-1])


# -- continuous adaptation protocol -----------------------------------------

def drifting_stream(spec: DomainFamilySpec, n_samples: int, start_deg: float,
                    end_deg: float, seed: int):
    """Stream whose rotation angle drifts monotonically from start to end."""
    rng = np.random.default_rng([seed, 991])
    gen = BASE_GENERATORS[spec.base_dataset]
    x, y = gen(n_samples, spec.noise_std, rng)
    order = rng.permutation(n_samples)
    x, y = x[order], y[order]
    angles = np.linspace(start_deg, end_deg, n_samples)
    xs = np.stack([rotate(xi.reshape(1, 2), a)[0] for xi, a in zip(x, angles)])
    return xs, y


def run_continuous(spec: DomainFamilySpec, variant: str, cfg: TrainConfig,
                   n_stream: int = 2000, start_deg: float = 0.0,
                   end_deg: float = 120.0, refine_capacity: int = 16,
                   refine_alpha: float = 0.1, refine_lr: float = 1e-3,
                   stage1_net: Network | None = None):
    """Source-trained model on a drifting stream, prequential evaluation.

    Returns (ResultRow, per-sample records [(idx, pred, label, correct,
    cum_acc), ...]).
    """
    if variant not in CONTINUOUS_VARIANTS:
        raise ConfigError(f"unknown continuous variant {variant!r}")
    t0 = time.perf_counter()
    source = domain_ids(spec)[0]
    net = (copy.deepcopy(stage1_net) if stage1_net is not None
           else train_source_model(spec, source, cfg))
    xs, ys = drifting_stream(spec, n_stream, start_deg, end_deg, cfg.seed)

    net.add_domain("target", init=net.domain_params(source))
    engine = RefinementEngine(
        net, "target", capacity=refine_capacity, alpha=refine_alpha,
        refine_lr=refine_lr,
        update_stats=variant in ("refine_stats", "refine_full"),
        update_scale_bias=variant == "refine_full")
    preds, cum = engine.run_stream(xs, ys)
    records = [(i, int(p), int(y), int(p == y), c)
               for i, (p, y, c) in enumerate(zip(preds, ys, cum))]
    row = ResultRow(source, "stream", variant, cfg.seed, float(cum[-1]),
                    time.perf_counter() - t0)
    return row, records


# -- auxiliary-count sweep ---------------------------------------------------

def sweep_auxiliary_count(spec: DomainFamilySpec, source: str, target: str,
                          counts: list[int], repeats: int, cfg: TrainConfig,
                          variant: str = "adagraph_full",
                          kernel: KernelConfig | None = None):
    """Accuracy vs number of (randomly sampled) auxiliary domains.

    Returns a list of (count, mean accuracy, std accuracy, rows).
    """
    family = generate_family(spec)
    others = [d for d in domain_ids(spec) if d not in (source, target)]
    stage1_net = train_source_model(spec, source, cfg, family)
    out = []
    for count in counts:
        if not 1 <= count <= len(others):
            raise ConfigError(f"auxiliary count {count} out of range")
        rows = []
        for rep in range(repeats):
            rng = np.random.default_rng([spec.seed, cfg.seed, count, rep])
            chosen = sorted(rng.choice(others, size=count, replace=False))
            sub_family = {d: family[d] for d in [source, target, *chosen]}
            row = run_pda(spec, variant, source, target, cfg, kernel=kernel,
                          stage1_net=stage1_net, family=sub_family)
            rows.append(row)
        accs = np.array([r.accuracy for r in rows])
        out.append((count, float(accs.mean()), float(accs.std()), rows))
    return out
