"""Experiment configuration: defaults, JSON files and flag overrides.

Precedence is flags > config file > defaults. Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .benchmark import CONTINUOUS_VARIANTS, VARIANTS, DomainFamilySpec
from .errors import ConfigError
from .graph import KernelConfig
from .training import TrainConfig


@dataclass
class ExperimentConfig:
    # benchmark family
    base_dataset: str = "two_moons"
    n_domains: int = 18
    samples_per_domain: int = 300
    noise_std: float = 0.1
    translation: float = 0.0
    # training
    epochs_stage1: int = 30
    epochs_stage2: int = 1
    lr_stage1: float = 0.5
    lr_stage2: float = 0.05
    batch_size: int = 16
    lambda_entropy: float = 1.0
    gbn_momentum: float = 0.1
    update_shared_stage2: bool = False
    hidden: int = 32
    # kernel
    sigma: float = 0.1
    # refinement
    buffer_capacity: int = 16
    buffer_alpha: float = 0.1
    refine_lr: float = 1e-3
    # protocol selection
    variants: list[str] = field(default_factory=lambda: ["adagraph_full"])
    seeds: list[int] = field(default_factory=lambda: [0])
    source: str = "d00"
    target: str | None = None
    min_angular_distance: float = 0.0
    # continuous protocol
    n_stream: int = 2000
    drift_start_deg: float = 0.0
    drift_end_deg: float = 120.0
    # auxiliary-count sweep
    sweep_counts: list[int] = field(default_factory=lambda: [2, 8, 16])
    sweep_repeats: int = 5
    # io
    out: str = "runs/latest"
    figures: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.lambda_entropy < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.buffer_capacity < 2:
            raise ConfigError("buffer_capacity must be >= 2")
        if not 0 < self.buffer_alpha <= 1:
            raise ConfigError("buffer_alpha must be in (0, 1]")
        for v in self.variants:
            if v not in VARIANTS and v not in CONTINUOUS_VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        DomainFamilySpec(self.base_dataset, self.n_domains,
                         self.samples_per_domain, self.noise_std,
                         self.translation, self.seeds[0])
        return self

    # -- derived views -------------------------------------------------------

    def family_spec(self, seed: int | None = None) -> DomainFamilySpec:
        return DomainFamilySpec(
            base_dataset=self.base_dataset, n_domains=self.n_domains,
            samples_per_domain=self.samples_per_domain,
            noise_std=self.noise_std, translation=self.translation,
            seed=self.seeds[0] if seed is None else seed)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs_stage1=self.epochs_stage1, epochs_stage2=self.epochs_stage2,
            lr_stage1=self.lr_stage1, lr_stage2=self.lr_stage2,
            batch_size=self.batch_size, lambda_entropy=self.lambda_entropy,
            gbn_momentum=self.gbn_momentum, seed=seed,
            update_shared_stage2=self.update_shared_stage2)

    def kernel(self) -> KernelConfig:
        return KernelConfig(sigma=self.sigma)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lambda_entropy")
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_KEY_ALIASES = {"lambda": "lambda_entropy"}


def _coerce(name: str, value):
    f = _FIELDS[name]
    try:
        if f.type in ("int", int):
            if isinstance(value, bool) or (isinstance(value, float)
                                           and value != int(value)):
                raise ValueError
            return int(value)
        if f.type in ("float", float):
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if f.type in ("bool", bool):
            if not isinstance(value, bool):
                raise ValueError
            return value
        if name in ("variants",):
            return [str(v) for v in value]
        if name in ("seeds", "sweep_counts"):
            return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"bad type for key {name!r}: {value!r}") from None
    return value


def parse_config(file_path: str | None = None, overrides: dict | None = None
                 ) -> ExperimentConfig:
    """Resolve a config from defaults, an optional JSON file and overrides."""
    values: dict = {}
    if "ADAGRAPH_SEED" in os.environ:
        values["seeds"] = [int(os.environ["ADAGRAPH_SEED"])]
    for layer in (_load_file(file_path), overrides or {}):
        for key, value in layer.items():
            name = _KEY_ALIASES.get(key, key)
            if name not in _FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            values[name] = _coerce(name, value)
    return ExperimentConfig(**values).validate()


def _load_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def write_resolved(cfg: ExperimentConfig, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved_config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    return path
