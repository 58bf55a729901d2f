"""Run configuration: typed sections, strict validation, TOML round trip.

Every field has a default. Unknown keys and wrong types are errors, reported
with their dotted path (``smoothing.sigma_max``).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .errors import ConfigError


@dataclass
class ModelSection:
    kind: str = "window_majority"
    layout: list = field(default_factory=lambda: [4, 4])
    centers: list = field(default_factory=list)
    radius: int = 1
    decay: float = 0.7
    scale: float = 4.0
    model_seed: int = 0
    signs: list = field(default_factory=list)
    bias: list = field(default_factory=list)


@dataclass
class DataSection:
    n_inputs: int = 4
    density: float = 0.5
    inputs: list = field(default_factory=list)


@dataclass
class SmoothingSection:
    family: str = "gaussian"
    scheme: str = "isotropic"
    statistic: str = "votes"
    sigma: float = 0.5
    sigma_min: float = 0.25
    sigma_max: float = 1.0
    theta: float = 0.2
    theta_min: float = 0.1
    theta_max: float = 0.4
    theta_plus: float = 0.01
    theta_minus: float = 0.6
    grid: list = field(default_factory=lambda: [1, 1])
    n_clusters: int = 2
    cluster_of_dim: list = field(default_factory=list)
    edge_counts: list = field(default_factory=list)


@dataclass
class ThreatSection:
    p: int = 2
    domain: str = "continuous"
    epsilons: list = field(default_factory=list)
    max_budget: int = 3
    eps_plus: int = 0


@dataclass
class MonteCarloSection:
    n1: int = 100
    n2: int = 1000
    alpha: float = 0.01
    correction: str = "holm"
    n_thresholds: int = 51
    reuse_samples: bool = False


@dataclass
class CollectiveSection:
    mode: str = "relaxed"
    n_bins: int = 0
    max_integer: int = 64
    eta_max: float = 1e9


@dataclass
class OutputSection:
    dir: str = "out"


@dataclass
class RunConfig:
    seed: int = 0
    model: ModelSection = field(default_factory=ModelSection)
    data: DataSection = field(default_factory=DataSection)
    smoothing: SmoothingSection = field(default_factory=SmoothingSection)
    threat: ThreatSection = field(default_factory=ThreatSection)
    monte_carlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    collective: CollectiveSection = field(default_factory=CollectiveSection)
    output: OutputSection = field(default_factory=OutputSection)


_CHOICES = {
    "model.kind": ("window_majority", "soft_logistic"),
    "smoothing.family": ("gaussian", "uniform", "bernoulli", "sparsity"),
    "smoothing.scheme": ("isotropic", "grid", "cluster"),
    "smoothing.statistic": ("votes", "scores"),
    "threat.domain": ("continuous", "binary"),
    "monte_carlo.correction": ("holm", "bonferroni"),
    "collective.mode": ("relaxed", "exact", "both"),
}


def _coerce(value: Any, kind: type, path: str) -> Any:
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type")


_TYPES = {"int": int, "float": float, "str": str, "bool": bool, "list": list}


def _section_from_dict(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(prefix + '.' + k if prefix else k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        path = f"{prefix}.{name}" if prefix else name
        ftype = known[name].type
        if isinstance(ftype, str) and ftype in _TYPES:
            kwargs[name] = _coerce(value, _TYPES[ftype], path)
        else:
            section_cls = {
                "ModelSection": ModelSection,
                "DataSection": DataSection,
                "SmoothingSection": SmoothingSection,
                "ThreatSection": ThreatSection,
                "MonteCarloSection": MonteCarloSection,
                "CollectiveSection": CollectiveSection,
                "OutputSection": OutputSection,
            }[ftype]
            kwargs[name] = _section_from_dict(section_cls, value, path)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    cfg = _section_from_dict(RunConfig, data, "")
    validate(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "rb") as handle:
            data = tomli.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def dumps_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def save_config(cfg: RunConfig, path: str | Path):
    Path(path).write_text(dumps_config(cfg))


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def validate(cfg: RunConfig):
    """Cross-field consistency checks."""
    for path, options in _CHOICES.items():
        section, name = path.split(".")
        value = getattr(getattr(cfg, section), name)
        _require(value in options, f"{path}: expected one of {options}, got {value!r}")
    _require(0 <= cfg.seed < 2 ** 63, "seed: must be a nonnegative 63-bit integer")
    m, s, t, mc, col = cfg.model, cfg.smoothing, cfg.threat, cfg.monte_carlo, cfg.collective
    _require(len(m.layout) == 2 and all(isinstance(v, int) and v > 0 for v in m.layout), "model.layout: need two positive integers")
    d_in = m.layout[0] * m.layout[1]
    _require(all(isinstance(c, int) and 0 <= c < d_in for c in m.centers), "model.centers: indices must lie inside the layout")
    _require(len(set(m.centers)) == len(m.centers), "model.centers: duplicate output centers")
    _require(m.radius >= 0, "model.radius: must be nonnegative")
    _require(m.decay > 0, "model.decay: must be positive")
    _require(cfg.data.n_inputs >= 1 or cfg.data.inputs, "data.n_inputs: need at least one input")
    _require(0.0 <= cfg.data.density <= 1.0, "data.density: must lie in [0, 1]")
    for k, row in enumerate(cfg.data.inputs):
        _require(isinstance(row, list) and len(row) == d_in, f"data.inputs[{k}]: need {d_in} values")

    binary = s.family in ("bernoulli", "sparsity")
    _require(t.domain == ("binary" if binary else "continuous"), f"threat.domain: family {s.family!r} needs domain {'binary' if binary else 'continuous'!r}")
    expected_p = {"gaussian": 2, "uniform": 1, "bernoulli": 0, "sparsity": 0}[s.family]
    _require(t.p == expected_p, f"threat.p: family {s.family!r} certifies p = {expected_p}")
    _require(not (s.family == "uniform" and s.statistic == "scores"), "smoothing.statistic: uniform smoothing certifies votes only")
    _require(not (s.family == "sparsity" and s.scheme == "grid"), "smoothing.scheme: sparsity-aware smoothing supports isotropic or cluster schemes")
    _require(s.sigma > 0 and s.sigma_min > 0 and s.sigma_max >= s.sigma_min, "smoothing.sigma*: need 0 < sigma_min <= sigma_max and sigma > 0")
    if s.family == "uniform":
        _require(math.isfinite(s.sigma_max), "smoothing.sigma_max: uniform halfwidths must be finite")
    for name in ("theta", "theta_plus", "theta_minus", "theta_min", "theta_max"):
        value = getattr(s, name)
        _require(0 < value < 1, f"smoothing.{name}: must lie strictly between 0 and 1")
    _require(s.theta_min <= s.theta_max, "smoothing.theta_min: must not exceed theta_max")
    _require(len(s.grid) == 2 and all(isinstance(v, int) and v >= 1 for v in s.grid), "smoothing.grid: need two positive integers")
    _require(s.grid[0] <= m.layout[0] and s.grid[1] <= m.layout[1], "smoothing.grid: more cells than pixels")
    _require(s.n_clusters >= 1, "smoothing.n_clusters: must be positive")
    if s.cluster_of_dim:
        _require(len(s.cluster_of_dim) == d_in, f"smoothing.cluster_of_dim: need {d_in} entries")
        _require(all(isinstance(c, int) and 0 <= c < s.n_clusters for c in s.cluster_of_dim), "smoothing.cluster_of_dim: cluster index out of range")
    if s.edge_counts:
        _require(len(s.edge_counts) == s.n_clusters and all(len(r) == s.n_clusters for r in s.edge_counts), "smoothing.edge_counts: need an n_clusters square matrix")

    _require(all(isinstance(e, (int, float)) and e >= 0 for e in t.epsilons), "threat.epsilons: budgets must be nonnegative numbers")
    _require(all(a < b for a, b in zip(t.epsilons, t.epsilons[1:])), "threat.epsilons: must be strictly ascending")
    _require(not t.epsilons or t.epsilons[0] == 0, "threat.epsilons: must start at 0")
    if binary:
        _require(all(float(e).is_integer() for e in t.epsilons), "threat.epsilons: binary budgets must be integers")
    _require(t.max_budget >= 0 and t.eps_plus >= 0, "threat.max_budget: must be nonnegative")

    _require(mc.n1 >= 1 and mc.n2 >= 1, "monte_carlo.n1/n2: need at least one sample")
    _require(0 < mc.alpha < 1, "monte_carlo.alpha: must lie in (0, 1)")
    _require(mc.n_thresholds >= 2, "monte_carlo.n_thresholds: need at least two thresholds")
    _require(col.n_bins >= 0, "collective.n_bins: must be nonnegative (0 disables quantization)")
    _require(col.max_integer >= 1, "collective.max_integer: must be positive")
    _require(col.eta_max > 0, "collective.eta_max: must be positive")


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Copy of ``cfg`` with dotted-path fields replaced, revalidated."""
    data = config_to_dict(cfg)
    for path, value in overrides.items():
        node = data
        parts = path.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown section in override {path!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown key in override {path!r}")
        node[parts[-1]] = value
    return config_from_dict(data)
