"""Brute-force ground truth for small binary problems.

Smoothed predictions are computed exactly by summing over all ``2^D`` noisy
inputs. Attacks enumerate every perturbation within the budget. Both are
exponential, so the input size is capped and exceeding a cap is an error.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .base_certs import (
    InterfaceCert,
    SmoothedStats,
    SparsityCert,
    bernoulli_variance_cert,
    holds_at,
    sparsity_variance_cert,
)
from .collective import (
    Partitioning,
    ThreatModel,
    build_problem,
    naive_count,
    solve_collective,
    sparsity_collective,
)
from .distributions import DiscreteDistribution, LocalizedScheme, exact_pmf
from .errors import CapacityError, ConfigError
from .models import Model, predict_batch

MAX_STATS_DIM = 16
MAX_ATTACK_DIM = 12
MAX_ATTACK_BUDGET = 4


def all_binary_inputs(dim: int) -> np.ndarray:
    """Every binary vector of length ``dim``, one per row, in counting order."""
    if dim > MAX_STATS_DIM:
        raise CapacityError(f"enumerating 2^{dim} inputs exceeds the cap of 2^{MAX_STATS_DIM}")
    codes = np.arange(2 ** dim)[:, None]
    return ((codes >> np.arange(dim - 1, -1, -1)) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class ExactStats:
    """Per-output smoothed quantities.

    ``labels`` is the smoothed prediction (class with the larger expected
    score), ``mu`` its expected score, ``zeta`` the expected squared
    deviation of that score from ``nu``, ``q`` the per-class probability of
    the base model's label.
    """

    labels: np.ndarray
    mu: np.ndarray
    zeta: np.ndarray
    nu: np.ndarray
    q: np.ndarray
    expected: np.ndarray

    def stats(self, n: int) -> SmoothedStats:
        return SmoothedStats(mu=float(self.mu[n]), zeta=float(self.zeta[n]), nu=float(self.nu[n]), q=float(self.q[n, self.labels[n]]))


class ScoreTable:
    """Model scores on every binary input, computed once and reused."""

    def __init__(self, model: Model):
        self.model = model
        self.inputs = all_binary_inputs(model.d_in)
        self.scores = predict_batch(model, self.inputs)
        self.base_labels = np.argmax(self.scores, axis=2)

    def smoothed(self, dist: DiscreteDistribution, x, outputs: Sequence[int], nu=None) -> ExactStats:
        pmf = exact_pmf(dist, x, self.inputs)
        outputs = list(outputs)
        scores = self.scores[:, outputs, :]
        expected = np.einsum("z,zkc->kc", pmf, scores)
        labels = np.argmax(expected, axis=1)
        top = scores[:, np.arange(len(outputs)), labels]
        mu = expected[np.arange(len(outputs)), labels]
        nu_arr = mu.copy() if nu is None else np.broadcast_to(np.asarray(nu, dtype=float), mu.shape).copy()
        zeta = pmf @ (top - nu_arr[None, :]) ** 2
        onehot = np.eye(2)[self.base_labels[:, outputs]]
        q = np.einsum("z,zkc->kc", pmf, onehot)
        return ExactStats(labels, mu, zeta, nu_arr, q, expected)

    def smoothed_labels(self, scheme: LocalizedScheme, x) -> np.ndarray:
        labels = np.empty(scheme.d_out, dtype=int)
        for subset, dist in zip(scheme.output_subsets, scheme.distributions):
            pmf = exact_pmf(dist, x, self.inputs)
            expected = np.einsum("z,zkc->kc", pmf, self.scores[:, list(subset), :])
            labels[list(subset)] = np.argmax(expected, axis=1)
        return labels


def exact_smoothed_stats(model: Model, dist: DiscreteDistribution, x, nu=None, table: ScoreTable | None = None) -> ExactStats:
    """Exact smoothed statistics of every output under one distribution."""
    table = table or ScoreTable(model)
    return table.smoothed(dist, x, range(model.d_out), nu)


def scheme_stats(model: Model, scheme: LocalizedScheme, x, table: ScoreTable | None = None) -> ExactStats:
    """Exact statistics where each output uses the distribution of its subset."""
    table = table or ScoreTable(model)
    d_out = scheme.d_out
    parts = {}
    for subset, dist in zip(scheme.output_subsets, scheme.distributions):
        stats = table.smoothed(dist, x, subset)
        for k, n in enumerate(subset):
            parts[n] = (stats.labels[k], stats.mu[k], stats.zeta[k], stats.nu[k], stats.q[k], stats.expected[k])
    cols = list(zip(*[parts[n] for n in range(d_out)]))
    return ExactStats(*(np.array(c) for c in cols))


def exact_likelihood_ratio(dist: DiscreteDistribution, x, x_prime) -> float:
    """Expected squared likelihood ratio ``sum_z p'(z)^2 / p(z)`` by enumeration."""
    z = all_binary_inputs(dist.dim)
    p = exact_pmf(dist, x, z)
    p_prime = exact_pmf(dist, x_prime, z)
    if np.any((p == 0) & (p_prime > 0)):
        return float("inf")
    mask = p > 0
    return float(np.sum(p_prime[mask] ** 2 / p[mask]))


def perturbations(x, epsilon: int | None = None, eps_plus: int | None = None, eps_minus: int | None = None) -> Iterator[np.ndarray]:
    """Every binary ``x'`` within the budget, smallest flip sets first.

    Either a total flip count ``epsilon`` or separate addition and deletion
    counts are given.
    """
    x = np.asarray(x, dtype=np.int8)
    if eps_plus is not None:
        zeros = np.nonzero(x == 0)[0]
        ones = np.nonzero(x == 1)[0]
        for k_add in range(min(int(eps_plus), zeros.size) + 1):
            for k_del in range(min(int(eps_minus), ones.size) + 1):
                for add in itertools.combinations(zeros, k_add):
                    for rem in itertools.combinations(ones, k_del):
                        out = x.copy()
                        out[list(add) + list(rem)] ^= 1
                        yield out
        return
    for k in range(min(int(epsilon), x.size) + 1):
        for flips in itertools.combinations(range(x.size), k):
            out = x.copy()
            out[list(flips)] ^= 1
            yield out


def _check_attack_caps(model: Model, threat: ThreatModel):
    if threat.domain != "binary":
        raise ConfigError("exhaustive attacks need a binary threat model")
    if model.d_in > MAX_ATTACK_DIM:
        raise CapacityError(f"D_in = {model.d_in} exceeds the attack cap of {MAX_ATTACK_DIM}")
    budgets = [threat.epsilon] if threat.eps_plus is None else [threat.eps_plus, threat.eps_minus]
    if max(budgets) > MAX_ATTACK_BUDGET:
        raise CapacityError(f"budget {max(budgets)} exceeds the attack cap of {MAX_ATTACK_BUDGET}")


def _ball(x, threat: ThreatModel):
    if threat.eps_plus is not None:
        return perturbations(x, eps_plus=threat.eps_plus, eps_minus=threat.eps_minus)
    return perturbations(x, epsilon=threat.epsilon)


def exhaustive_attack(
    model: Model,
    scheme: LocalizedScheme,
    x,
    threat: ThreatModel,
    targets: Sequence[int] | None = None,
    table: ScoreTable | None = None,
) -> int:
    """Fewest targeted smoothed predictions that any perturbation leaves unchanged."""
    _check_attack_caps(model, threat)
    table = table or ScoreTable(model)
    targets = list(range(scheme.d_out)) if targets is None else sorted(set(targets))
    clean = table.smoothed_labels(scheme, x)
    best = len(targets)
    for x_prime in _ball(x, threat):
        labels = table.smoothed_labels(scheme, x_prime)
        best = min(best, int(np.sum(labels[targets] == clean[targets])))
        if best == 0:
            break
    return best


# --- soundness harness --------------------------------------------------------

@dataclass
class HarnessReport:
    checks: int = 0
    violations: list = field(default_factory=list)
    ordering: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.ordering

    def merge(self, other: "HarnessReport"):
        self.checks += other.checks
        self.violations.extend(other.violations)
        self.ordering.extend(other.ordering)


def _scale_cert(cert, factor: float):
    if cert is None or factor == 1.0:
        return cert
    if isinstance(cert, SparsityCert):
        return SparsityCert(cert.w_plus, cert.w_minus, cert.eta * factor)
    return InterfaceCert(cert.weights, cert.eta * factor, cert.p)


def exact_certificates(model: Model, scheme: LocalizedScheme, x, table: ScoreTable | None = None, eta_scale: float = 1.0):
    """Certificates built from exact statistics (``nu`` equal to the mean)."""
    stats = scheme_stats(model, scheme, x, table)
    certs = []
    for n in range(scheme.d_out):
        dist = scheme.distribution_for(n)
        if dist.family == "bernoulli":
            cert = bernoulli_variance_cert(dist.theta, stats.stats(n))
        elif dist.family == "sparsity":
            cert = sparsity_variance_cert(dist.theta_plus, dist.theta_minus, stats.stats(n))
        else:
            raise ConfigError("exact certificates need a discrete smoothing law")
        certs.append(_scale_cert(cert, eta_scale))
    return stats, certs


def check_instance(
    model: Model,
    scheme: LocalizedScheme,
    x,
    max_budget: int,
    n_bins_levels: Sequence[Optional[int]] = (None, 2, 8, 32),
    partitioning: Partitioning | None = None,
    eta_scale: float = 1.0,
    label: str = "",
    modes: Sequence[str] = ("relaxed", "exact"),
) -> HarnessReport:
    """Compare every certified bound against exhaustive attacks for budgets ``0..max_budget``.

    Also checks each base certificate pointwise on every perturbation it
    claims to cover, and the orderings naive <= relaxed <= exact <= |T| and
    monotonicity under quantization refinement.
    """
    report = HarnessReport()
    table = ScoreTable(model)
    x = np.asarray(x, dtype=np.int8)
    stats, certs = exact_certificates(model, scheme, x, table, eta_scale)
    clean = stats.labels
    targets = [n for n in range(scheme.d_out) if certs[n] is not None]
    sparsity = any(isinstance(c, SparsityCert) for c in certs)

    if sparsity:
        budgets = [(a, d) for a in range(max_budget + 1) for d in range(max_budget + 1)]
    else:
        budgets = list(range(max_budget + 1))
    for budget in budgets:
        if sparsity:
            threat = ThreatModel(0, budget[0] + budget[1], "binary", budget[0], budget[1])
        else:
            threat = ThreatModel(0, budget, "binary")
        _check_attack_caps(model, threat)
        truth = len(targets)
        for x_prime in _ball(x, threat):
            labels = table.smoothed_labels(scheme, x_prime)
            truth = min(truth, int(np.sum(labels[targets] == clean[targets])))
            for n in targets:
                report.checks += 1
                if holds_at(certs[n], x, x_prime) and labels[n] != clean[n]:
                    report.violations.append(f"{label} budget={budget}: base certificate of output {n} covers x'={x_prime.tolist()} but the prediction changes")
        bounds = {}
        if sparsity:
            bounds["naive"] = sparsity_collective(certs, x, budget[0], budget[1], targets, "relaxed").n_precertified
            for mode in modes:
                bounds[mode] = sparsity_collective(certs, x, budget[0], budget[1], targets, mode).value
        else:
            bounds["naive"] = naive_count(certs, threat, targets)
            for n_bins in n_bins_levels:
                for mode in modes:
                    problem = build_problem(certs, threat, targets, partitioning, n_bins)
                    bounds[(mode, n_bins)] = solve_collective(problem, mode).value
        for name, value in bounds.items():
            report.checks += 1
            if value > truth:
                report.violations.append(f"{label} budget={budget}: bound {name}={value} exceeds true robust count {truth}")
        _check_ordering(report, bounds, len(targets), n_bins_levels, modes, sparsity, f"{label} budget={budget}")
    return report


def _check_ordering(report, bounds, n_targets, n_bins_levels, modes, sparsity, where):
    if sparsity:
        chains = [["naive"] + list(modes)]
    else:
        chains = [["naive"] + [(m, b) for m in modes] for b in n_bins_levels]
        quantized = sorted(b for b in n_bins_levels if b is not None)
        for mode in modes:
            # Refinement only makes sense between nested grids, then the unquantized radii.
            for coarse, fine in itertools.combinations(quantized, 2):
                if fine % coarse == 0:
                    chains.append([(mode, coarse), (mode, fine)])
            if None in n_bins_levels:
                chains.extend([(mode, b), (mode, None)] for b in quantized)
    for chain in chains:
        values = [bounds[k] for k in chain]
        report.checks += 1
        if any(a > b for a, b in zip(values, values[1:])) or values[-1] > n_targets:
            report.ordering.append(f"{where}: ordering broken along {chain}: {values} (|T|={n_targets})")
