"""Experiment configuration read from YAML.

Example::

    experiment: mean
    seed: 20261018
    replicates: 10000
    grid: [1.0, 2.0, 4.0]
    model: {catalogue: critical}
    arrivals: {kind: poisson, rate: 1.0}
    s_grid: [[-0.5, -0.5], [-1.0, 0.0]]
    output: results/
    variant: renewal-consistent
    workers: 1
    sigma: 3.0
    p_threshold: 0.01

``model`` is ``{catalogue: name}`` (optionally ``mu``), ``{two_type: {mu1,
mu2, p12, p21}}`` or explicit ``{types: [{rate, offspring: [[counts, p],
...]}, ...]}``. ``arrivals.kind`` is one of ``none``, ``poisson`` (``rate``),
``exponential`` (``lambda_inf``, ``delta``), ``table`` (``t`` and ``lambda``
lists, or ``csv``) and ``gpp`` (``a``, ``b``, ``lam``).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..arrivals import ArrivalSpec, arrivals_from_dict
from ..model import BranchingModel, model_from_spec

EXPERIMENTS = ("mean", "lt", "limit", "transient", "simulate", "acceptance")
VARIANTS = ("renewal-consistent", "paper-literal")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    replicates: int
    grid: list[float]
    model: dict
    arrivals: dict = field(default_factory=lambda: {"kind": "none"})
    s_grid: list[list[float]] = field(default_factory=list)
    output: str = "results"
    variant: str = "renewal-consistent"
    workers: int = 1
    sigma: float = 3.0
    p_threshold: float = 0.01
    base_dir: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.seed is None:
            raise ConfigError("seed is required")
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        self.replicates = int(self.replicates)
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        self.grid = [float(x) for x in np.atleast_1d(self.grid)]
        if not self.grid or np.any(np.diff(self.grid) <= 0) or self.grid[0] < 0:
            raise ConfigError("grid must be nonempty, nonnegative and strictly increasing")
        self.s_grid = [[float(x) for x in np.atleast_1d(s)] for s in self.s_grid]
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        self.workers = int(self.workers)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def build_model(self) -> BranchingModel:
        return model_from_spec(self.model)

    def build_arrivals(self) -> ArrivalSpec:
        base = Path(self.base_dir) if self.base_dir else None
        return arrivals_from_dict(self.arrivals, base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(base_dir=self.base_dir, **d)


def config_from_dict(d: dict, base_dir=None) -> ExperimentConfig:
    known = set(ExperimentConfig.__dataclass_fields__) - {"base_dir"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"experiment", "seed", "replicates", "grid", "model"} - set(d)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    return ExperimentConfig(base_dir=None if base_dir is None else str(base_dir), **d)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict(d, base_dir=path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
