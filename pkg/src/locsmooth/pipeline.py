"""End-to-end certification runs driven by a :class:`RunConfig`.

A run samples noisy predictions for every input and output group, turns
them into per-output certificates, and evaluates naive and collective
bounds across a grid of budgets. Results are deterministic functions of the
configuration: all randomness comes from counter-based streams named by
``(seed, input, output group, phase)``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .base_certs import (
    InterfaceCert,
    SmoothedStats,
    bernoulli_variance_cert,
    gaussian_cert,
    gaussian_variance_cert,
    robust_to_ball,
    sparsity_variance_cert,
    uniform_cert,
)
from .collective import (
    Partitioning,
    ThreatModel,
    acr,
    build_problem,
    certified_accuracy_collective,
    certified_accuracy_naive,
    default_epsilon_grid,
    solve_collective,
    sparsity_collective,
    sparsity_precertified,
)
from .config import RunConfig, config_to_dict, with_overrides
from .distributions import (
    BernoulliFlip,
    GaussianDiag,
    LocalizedScheme,
    SparsityAware,
    UniformBox,
    cluster_affinity_ranking,
    cluster_sparsity_thetas,
    grid_interpolated,
    sample,
    tile_grid,
)
from .errors import ConfigError, InputError
from .models import SoftLogistic, WindowMajority, predict, predict_batch
from .monte_carlo import (
    ScoreBatch,
    VoteBatch,
    candidate_label,
    clopper_pearson_lower,
    correction,
    dkw_bounds,
    mean_lower,
    second_moment_upper,
)
from .numerics import RngStream

PHASES = ("selection", "estimation")
CURVE_COLUMNS = (
    "epsilon",
    "naive_certified_accuracy",
    "relaxed_certified_accuracy",
    "exact_certified_accuracy",
    "abstain_rate",
)
_DATA_LANE = 1 << 63


def stream_id(input_index: int, subset: int, phase: int) -> int:
    return (int(input_index) << 32) | (int(subset) << 2) | int(phase)


# --- building blocks from the config -----------------------------------------

def build_model(cfg: RunConfig):
    m = cfg.model
    layout = tuple(m.layout)
    d_in = layout[0] * layout[1]
    centers = tuple(m.centers) if m.centers else tuple(range(d_in))
    if m.kind == "window_majority":
        return WindowMajority(layout, centers, m.radius)
    if m.signs:
        bias = m.bias or None
        return SoftLogistic(layout, centers, m.decay, m.signs, m.scale, bias)
    return SoftLogistic.generate(layout, centers, m.decay, m.model_seed, m.scale)


def build_inputs(cfg: RunConfig, d_in: int) -> np.ndarray:
    if cfg.data.inputs:
        return np.array(cfg.data.inputs, dtype=float)
    rows = []
    for a in range(cfg.data.n_inputs):
        lane = RngStream(cfg.seed, _DATA_LANE | a)
        rows.append((lane.uniform01(d_in) < cfg.data.density).astype(float))
    return np.array(rows)


def cluster_assignment(cfg: RunConfig, d_in: int) -> list[int]:
    s = cfg.smoothing
    if s.cluster_of_dim:
        return list(s.cluster_of_dim)
    return [d * s.n_clusters // d_in for d in range(d_in)]


def cluster_edge_counts(cfg: RunConfig, clusters: list[int]) -> np.ndarray:
    """Explicit counts, or counts of 4-neighbour pixel pairs between clusters."""
    s = cfg.smoothing
    if s.edge_counts:
        return np.array(s.edge_counts, dtype=float)
    rows, cols = cfg.model.layout
    counts = np.zeros((s.n_clusters, s.n_clusters))
    for r in range(rows):
        for c in range(cols):
            here = clusters[r * cols + c]
            for rr, cc in ((r + 1, c), (r, c + 1)):
                if rr < rows and cc < cols:
                    there = clusters[rr * cols + cc]
                    counts[here, there] += 1
                    if here != there:
                        counts[there, here] += 1
    return counts


@dataclass(frozen=True)
class Setup:
    model: object
    scheme: LocalizedScheme
    partitioning: Partitioning
    inputs: np.ndarray


def _distribution(family: str, low_noise, cfg: RunConfig):
    s = cfg.smoothing
    if family == "gaussian":
        return GaussianDiag(low_noise)
    if family == "uniform":
        return UniformBox(low_noise)
    if family == "bernoulli":
        return BernoulliFlip(low_noise)
    return SparsityAware(np.full(len(low_noise), s.theta_plus), low_noise)


def build_setup(cfg: RunConfig) -> Setup:
    model = build_model(cfg)
    s = cfg.smoothing
    d_in, d_out = model.d_in, model.d_out
    family = s.family
    if s.scheme == "isotropic":
        level = {"gaussian": s.sigma, "uniform": s.sigma, "bernoulli": s.theta, "sparsity": s.theta_minus}[family]
        dist = _distribution(family, np.full(d_in, level), cfg)
        scheme = LocalizedScheme.shared(dist, d_out)
        partitioning = Partitioning(scheme.output_subsets, (tuple(range(d_in)),))
    elif s.scheme == "grid":
        n_h, n_w = s.grid
        cells = tile_grid(model.layout, (n_h, n_w))
        cell_ids = sorted(set(cells))
        low, high = (s.theta_min, s.theta_max) if family == "bernoulli" else (s.sigma_min, s.sigma_max)
        subsets, dists = [], []
        for cell in cell_ids:
            members = tuple(n for n, ctr in enumerate(model.centers) if cells[ctr] == cell)
            if not members:
                continue
            subsets.append(members)
            dists.append(_distribution(family, grid_interpolated(n_h, n_w, low, high, cell, cells), cfg))
        scheme = LocalizedScheme(tuple(subsets), tuple(dists))
        inputs = tuple(tuple(d for d in range(d_in) if cells[d] == cell) for cell in cell_ids)
        partitioning = Partitioning(scheme.output_subsets, inputs)
    else:
        if family not in ("bernoulli", "sparsity"):
            raise ConfigError("smoothing.scheme: cluster localization needs a discrete family")
        clusters = cluster_assignment(cfg, d_in)
        ranking = cluster_affinity_ranking(cluster_edge_counts(cfg, clusters))
        table = cluster_sparsity_thetas(ranking, s.theta_min, s.theta_max, s.n_clusters)
        subsets, dists = [], []
        for k in range(s.n_clusters):
            members = tuple(n for n, ctr in enumerate(model.centers) if clusters[ctr] == k)
            if not members:
                continue
            subsets.append(members)
            dists.append(_distribution(family, np.array([table[k, clusters[d]] for d in range(d_in)]), cfg))
        scheme = LocalizedScheme(tuple(subsets), tuple(dists))
        inputs = tuple(tuple(d for d in range(d_in) if clusters[d] == k) for k in range(s.n_clusters))
        partitioning = Partitioning(scheme.output_subsets, tuple(g for g in inputs if g))
    return Setup(model, scheme, partitioning, build_inputs(cfg, d_in))


def uses_scores(cfg: RunConfig) -> bool:
    return cfg.smoothing.family in ("bernoulli", "sparsity") or cfg.smoothing.statistic == "scores"


# --- sampling ----------------------------------------------------------------

SampleCache = dict  # (input, subset, phase) -> array of shape (n_samples, len(subset))


def draw_samples(cfg: RunConfig, setup: Setup) -> SampleCache:
    """Per-output labels (votes) or class-1 scores for every sample."""
    cache: SampleCache = {}
    scores = uses_scores(cfg)
    mc = cfg.monte_carlo
    for a, x in enumerate(setup.inputs):
        for i, (subset, dist) in enumerate(zip(setup.scheme.output_subsets, setup.scheme.distributions)):
            for phase, n in ((0, mc.n1), (1, mc.n2)):
                if phase == 1 and mc.reuse_samples:
                    continue
                z = sample(dist, x, RngStream(cfg.seed, stream_id(a, i, phase)), n)
                out = predict_batch(setup.model, z)[:, list(subset), :]
                cache[(a, i, phase)] = out[:, :, 1] if scores else np.argmax(out, axis=2)
    return cache


def write_samples(cache: SampleCache, path: str | Path, scores: bool):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["input", "subset", "phase", "sample", "output", "value"])
        for (a, i, phase) in sorted(cache):
            block = cache[(a, i, phase)]
            for k in range(block.shape[0]):
                for j in range(block.shape[1]):
                    value = repr(float(block[k, j])) if scores else str(int(block[k, j]))
                    writer.writerow([a, i, PHASES[phase], k, j, value])


def read_samples(path: str | Path, cfg: RunConfig, setup: Setup) -> SampleCache:
    scores = uses_scores(cfg)
    raw: dict = {}
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                key = (int(row["input"]), int(row["subset"]), PHASES.index(row["phase"]))
                value = float(row["value"]) if scores else int(row["value"])
                raw.setdefault(key, {})[(int(row["sample"]), int(row["output"]))] = value
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}: malformed sample file ({exc})") from exc
    cache: SampleCache = {}
    mc = cfg.monte_carlo
    for a in range(len(setup.inputs)):
        for i, subset in enumerate(setup.scheme.output_subsets):
            for phase, n in ((0, mc.n1), (1, mc.n2)):
                if phase == 1 and mc.reuse_samples:
                    continue
                cells = raw.get((a, i, phase))
                if cells is None or len(cells) != n * len(subset):
                    raise InputError(f"{path}: expected {n} samples for input {a}, subset {i}, phase {PHASES[phase]}")
                block = np.empty((n, len(subset)), dtype=float if scores else np.int64)
                for (k, j), value in cells.items():
                    block[k, j] = value
                cache[(a, i, phase)] = block
    return cache


# --- certificates ------------------------------------------------------------

@dataclass
class InputResult:
    x: np.ndarray
    labels: list
    truth: list
    certs: list
    correct: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)


def certify_input(cfg: RunConfig, setup: Setup, cache: SampleCache, a: int) -> InputResult:
    """Smoothed labels and certificates for every output of input ``a``."""
    mc = cfg.monte_carlo
    scheme = setup.scheme
    d_out = scheme.d_out
    scores = uses_scores(cfg)
    labels = [0] * d_out
    evidence = [None] * d_out  # (count or top-score batch, nu)
    for i, subset in enumerate(scheme.output_subsets):
        first = cache[(a, i, 0)]
        second = first if mc.reuse_samples else cache[(a, i, 1)]
        for j, n in enumerate(subset):
            if scores:
                one = first[:, j]
                y = candidate_label([1.0 - one.mean(), one.mean()])
                top1 = one if y == 1 else 1.0 - one
                top2 = second[:, j] if y == 1 else 1.0 - second[:, j]
                nu = float(np.clip(top1.mean(), 0.0, 1.0))
                evidence[n] = (np.clip(top2, 0.0, 1.0), nu)
            else:
                y = candidate_label(VoteBatch.from_labels(first[:, j], 2))
                evidence[n] = (int(np.sum(second[:, j] == y)), None)
            labels[n] = y
    if scores:
        alphas = correction(mc.alpha, d_out, "bonferroni")
    else:
        alphas = correction(mc.alpha, d_out, mc.correction, [evidence[n][0] for n in range(d_out)])
    thresholds = np.linspace(0.0, 1.0, mc.n_thresholds)
    certs = []
    eta_max = cfg.collective.eta_max
    for n in range(d_out):
        dist = scheme.distribution_for(n)
        if scores:
            top, nu = evidence[n]
            bounds = dkw_bounds(ScoreBatch(top), thresholds, float(alphas[n]))
            mu_low = mean_lower(bounds)
            zeta_up = second_moment_upper(bounds, nu)
            # Anchoring at the mean bound gives the radius valid for any nu.
            stats = SmoothedStats(mu=mu_low, zeta=zeta_up, nu=mu_low)
            if dist.family == "bernoulli":
                cert = bernoulli_variance_cert(dist.theta, stats, eta_max)
            elif dist.family == "sparsity":
                cert = sparsity_variance_cert(dist.theta_plus, dist.theta_minus, stats, eta_max)
            else:
                cert = _gaussian_score_cert(dist.scales, stats, eta_max)
        else:
            q_low = clopper_pearson_lower(evidence[n][0], mc.n2, float(alphas[n]))
            if dist.family == "gaussian":
                cert = gaussian_cert(dist.scales, q_low, eta_max)
            else:
                cert = uniform_cert(dist.halfwidths, q_low, eta_max)
        certs.append(cert)
    truth = [int(v) for v in predict(setup.model, setup.inputs[a])[0]]
    correct = [n for n in range(d_out) if certs[n] is not None and labels[n] == truth[n]]
    return InputResult(setup.inputs[a], labels, truth, certs, correct)


def _gaussian_score_cert(scales, stats: SmoothedStats, eta_max: float):
    if stats.zeta <= 0 and stats.mu > 0.5:
        weights = np.where(np.isinf(scales), 0.0, 1.0 / np.asarray(scales) ** 2)
        return InterfaceCert(weights, eta_max, 2)
    return gaussian_variance_cert(scales, stats, eta_max)


def epsilon_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.threat.epsilons:
        return np.array(cfg.threat.epsilons, dtype=float)
    return default_epsilon_grid(cfg.threat.domain, cfg.threat.max_budget)


def _modes(cfg: RunConfig) -> list[str]:
    return {"relaxed": ["relaxed"], "exact": ["exact"], "both": ["relaxed", "exact"]}[cfg.collective.mode]


def evaluate_budgets(cfg: RunConfig, setup: Setup, result: InputResult, epsilons) -> None:
    """Fill ``result.bounds`` with per-budget naive flags and collective bounds."""
    correct = result.correct
    sparsity = cfg.smoothing.family == "sparsity"
    n_bins = cfg.collective.n_bins or None
    bounds = {"robust": [], "naive": [], "relaxed": [], "exact": []}
    for eps in epsilons:
        if sparsity:
            plus, minus = cfg.threat.eps_plus, int(eps)
            robust = [c is not None and sparsity_precertified(c, result.x, plus, minus) for c in result.certs]
        else:
            threat = ThreatModel(cfg.threat.p, float(eps), cfg.threat.domain)
            robust = [c is not None and robust_to_ball(c, threat.epsilon, threat.domain) for c in result.certs]
        bounds["robust"].append(robust)
        bounds["naive"].append(sum(1 for n in correct if robust[n]))
        for mode in ("relaxed", "exact"):
            if mode not in _modes(cfg):
                bounds[mode].append(None)
                continue
            if sparsity:
                value = sparsity_collective(result.certs, result.x, plus, minus, correct, mode, cfg.collective.max_integer).value
            else:
                problem = build_problem(result.certs, threat, correct, setup.partitioning, n_bins)
                value = solve_collective(problem, mode, cfg.collective.max_integer).value
            bounds[mode].append(value)
    result.bounds = bounds


# --- full runs ---------------------------------------------------------------

@dataclass
class CertifyRun:
    config: RunConfig
    epsilons: np.ndarray
    results: list
    curve: dict
    acr: dict

    def report(self) -> dict:
        return build_report(self)


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    return value


def run_certify(cfg: RunConfig, samples: SampleCache | None = None) -> CertifyRun:
    """Sample (or reuse ``samples``), certify every input and sweep the budget grid."""
    setup = build_setup(cfg)
    cache = samples if samples is not None else draw_samples(cfg, setup)
    epsilons = epsilon_grid(cfg)
    d_out = setup.scheme.d_out
    results = []
    for a in range(len(setup.inputs)):
        result = certify_input(cfg, setup, cache, a)
        evaluate_budgets(cfg, setup, result, epsilons)
        results.append(result)
    n_inputs = len(results)
    curve = {name: [] for name in CURVE_COLUMNS}
    modes = _modes(cfg)
    abstain_rate = sum(sum(c is None for c in r.certs) for r in results) / (n_inputs * d_out)
    for k, eps in enumerate(epsilons):
        curve["epsilon"].append(float(eps))
        naive = [certified_accuracy_naive(r.bounds["robust"][k], [n in r.correct for n in range(d_out)], d_out) for r in results]
        curve["naive_certified_accuracy"].append(float(np.mean(naive)))
        for mode in ("relaxed", "exact"):
            column = f"{mode}_certified_accuracy"
            if mode in modes:
                values = [certified_accuracy_collective(r.bounds[mode][k], d_out) for r in results]
                curve[column].append(float(np.mean(values)))
            else:
                curve[column].append(None)
        curve["abstain_rate"].append(abstain_rate)
    radii = {}
    for variant in ("naive", "relaxed", "exact"):
        column = curve[f"{variant}_certified_accuracy"]
        radii[variant] = None if column[0] is None else acr(epsilons, column)
    return CertifyRun(cfg, epsilons, results, curve, radii)


def _status(cert, robust: bool) -> str:
    if cert is None:
        return "abstained"
    return "base-robust" if robust else "base-broken"


def build_report(run: CertifyRun) -> dict:
    inputs = []
    for a, r in enumerate(run.results):
        predictions = []
        for n, cert in enumerate(r.certs):
            predictions.append({
                "output": n,
                "label": int(r.labels[n]),
                "true_label": int(r.truth[n]),
                "abstained": cert is None,
                "correct": n in r.correct,
                "certificate": None if cert is None else cert.to_dict(),
                "status": [_status(cert, flags[n]) for flags in r.bounds["robust"]],
            })
        inputs.append({
            "index": a,
            "x": [float(v) for v in r.x],
            "n_correct": len(r.correct),
            "precertified": [sum(1 for n in r.correct if flags[n]) for flags in r.bounds["robust"]],
            "naive": r.bounds["naive"],
            "relaxed": r.bounds["relaxed"],
            "exact": r.bounds["exact"],
            "predictions": predictions,
        })
    return _jsonable({
        "version": __version__,
        "config": config_to_dict(run.config),
        "epsilons": [float(e) for e in run.epsilons],
        "curve": run.curve,
        "acr": run.acr,
        "inputs": inputs,
    })


def curve_rows(run: CertifyRun) -> list[list[str]]:
    rows = []
    for k in range(len(run.epsilons)):
        row = []
        for name in CURVE_COLUMNS:
            value = run.curve[name][k]
            row.append("" if value is None else repr(float(value)))
        rows.append(row)
    return rows


def write_outputs(run: CertifyRun, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    curve_path = out / "curve.csv"
    report_path.write_text(json.dumps(run.report(), indent=2, sort_keys=True) + "\n")
    with open(curve_path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        writer.writerows(curve_rows(run))
    return report_path, curve_path


# --- parameter sweeps ----------------------------------------------------------

def pareto_dominated(points: list[tuple[float, float]]) -> list[bool]:
    """Flag points beaten on one coordinate and matched or beaten on the other."""
    flags = []
    for i, (acc_i, acr_i) in enumerate(points):
        flags.append(any(
            acc_j >= acc_i and acr_j >= acr_i and (acc_j > acc_i or acr_j > acr_i)
            for j, (acc_j, acr_j) in enumerate(points) if j != i
        ))
    return flags


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product of a nested ``{section: {key: [values]}}`` table, keys in sorted order."""
    axes = []
    for section in sorted(grid):
        values = grid[section]
        if not isinstance(values, dict):
            raise ConfigError(f"sweep grid: {section!r} must be a table of value lists")
        for key in sorted(values):
            options = values[key]
            if not isinstance(options, list) or not options:
                raise ConfigError(f"sweep grid: {section}.{key} must be a nonempty list")
            axes.append((f"{section}.{key}", options))
    if not axes:
        raise ConfigError("sweep grid is empty")
    names = [name for name, _ in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(opts for _, opts in axes))]


def run_sweep(cfg: RunConfig, grid: dict, variant: str | None = None) -> list[dict]:
    """Certify every grid point and flag Pareto-dominated (accuracy, ACR) pairs.

    Point ``k`` runs with seed ``cfg.seed + k``. ``variant`` selects which
    curve supplies accuracy at budget zero and ACR; by default the strongest
    collective bound that was computed.
    """
    rows = []
    for k, overrides in enumerate(expand_grid(grid)):
        point_cfg = with_overrides(cfg, {**overrides, "seed": cfg.seed + k})
        run = run_certify(point_cfg)
        chosen = variant or ("exact" if run.acr["exact"] is not None else "relaxed")
        accuracy = run.curve[f"{chosen}_certified_accuracy"][0]
        if accuracy is None:
            raise ConfigError(f"variant {chosen!r} was not computed; adjust collective.mode")
        rows.append({"point": k, **overrides, "variant": chosen, "accuracy": accuracy, "acr": run.acr[chosen]})
    flags = pareto_dominated([(r["accuracy"], r["acr"]) for r in rows])
    for row, flag in zip(rows, flags):
        row["dominated"] = flag
    return rows


def write_sweep(rows: list[dict], path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0].keys())
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else str(v) for v in (row[c] for c in columns)])


# --- oracle check ----------------------------------------------------------------

def run_oracle_check(cfg: RunConfig, eta_scale: float = 1.0):
    """Soundness harness over the configured inputs using exact statistics.

    ``eta_scale`` inflates every certificate radius; it exists to confirm
    that the harness catches overclaiming certificates.
    """
    from .oracle import HarnessReport, check_instance

    if cfg.smoothing.family not in ("bernoulli", "sparsity"):
        raise ConfigError("oracle-check needs a discrete smoothing family")
    setup = build_setup(cfg)
    budgets = [int(e) for e in epsilon_grid(cfg)]
    max_budget = max(budgets) if budgets else 0
    levels = [None, 2, 8, 32]
    if cfg.collective.n_bins and cfg.collective.n_bins not in levels:
        levels.append(cfg.collective.n_bins)
    summary = HarnessReport()
    for a, x in enumerate(setup.inputs):
        report = check_instance(
            setup.model,
            setup.scheme,
            x.astype(np.int8),
            max_budget,
            n_bins_levels=tuple(levels),
            partitioning=setup.partitioning,
            eta_scale=eta_scale,
            label=f"input {a}",
        )
        summary.merge(report)
    return summary
