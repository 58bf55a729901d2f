"""Collective certificates: how many predictions survive one shared attack.

Base certificates in ``(w, eta, p)`` form are combined into a mixed-integer
program. The adversary spends a budget vector ``b`` over input groups. An
indicator per (output group, radius level) records whether that level may
still be robust. Minimizing the count of robust predictions over all
feasible ``b`` lower-bounds the true worst case.

Reductions that keep the program small:

* outputs sharing one smoothing distribution share one weight row;
* input dimensions with identical weights share one budget variable;
* radii are rounded down to a per-group grid of thresholds;
* predictions robust to the whole ball are removed up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .base_certs import InterfaceCert, SparsityCert, robust_to_ball
from .errors import ConfigError, DomainError, InputError
from .lp_solver import LinearProgram, MixedProgram, SolveResult, solve_lp, solve_milp

FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class ThreatModel:
    p: int
    epsilon: float
    domain: str = "continuous"
    eps_plus: Optional[float] = None
    eps_minus: Optional[float] = None

    def __post_init__(self):
        if self.p not in (0, 1, 2):
            raise ConfigError(f"threat exponent must be 0, 1 or 2, got {self.p}")
        if self.domain not in ("continuous", "binary"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if not self.epsilon >= 0:
            raise ConfigError("budget must be nonnegative")
        if self.domain == "binary":
            if self.p != 0:
                raise ConfigError("binary threat models count flipped bits (p = 0)")
            for value in (self.epsilon, self.eps_plus, self.eps_minus):
                if value is not None and float(value) != math.floor(value):
                    raise ConfigError("binary budgets must be integers")
        if (self.eps_plus is None) != (self.eps_minus is None):
            raise ConfigError("split budgets need both eps_plus and eps_minus")

    @property
    def cap(self) -> float:
        """Total budget in units of the certificate's cost."""
        if self.p == 0:
            return float(math.floor(self.epsilon + 1e-12))
        return float(self.epsilon) ** self.p


@dataclass(frozen=True)
class Partitioning:
    """Groups of outputs sharing a distribution and groups of inputs sharing weights.

    ``thresholds`` optionally fixes the radius levels per output group. When
    ``None``, :func:`build_problem` derives them from ``n_bins`` or uses the
    exact radii.
    """

    output_subsets: tuple
    input_subsets: tuple
    thresholds: Optional[tuple] = None

    def __post_init__(self):
        out = tuple(tuple(int(n) for n in s) for s in self.output_subsets)
        inp = tuple(tuple(int(d) for d in s) for s in self.input_subsets)
        for name, subsets in (("output", out), ("input", inp)):
            flat = sorted(v for s in subsets for v in s)
            if flat != list(range(len(flat))) or any(len(s) == 0 for s in subsets):
                raise ConfigError(f"{name} subsets must partition 0..{len(flat) - 1} into nonempty groups")
        if self.thresholds is not None:
            rows = tuple(np.asarray(r, dtype=float) for r in self.thresholds)
            if len(rows) != len(out):
                raise ConfigError("need one threshold row per output subset")
            for i, row in enumerate(rows):
                if row.size == 0 or np.any(np.diff(row) <= 0):
                    raise ConfigError(f"thresholds of output subset {i} must be strictly ascending")
            object.__setattr__(self, "thresholds", rows)
        object.__setattr__(self, "output_subsets", out)
        object.__setattr__(self, "input_subsets", inp)

    @classmethod
    def unreduced(cls, d_out: int, d_in: int) -> "Partitioning":
        return cls(tuple((n,) for n in range(d_out)), tuple((d,) for d in range(d_in)))


def quantization_thresholds(etas: Sequence[float], n_bins: int) -> np.ndarray:
    """``n_bins`` evenly spaced levels from just below ``min(etas)`` toward ``max(etas)``.

    Levels are lower bin edges, so the grid for ``n_bins = 2 k`` contains the
    grid for ``k`` exactly and refining never loses a level.
    """
    if n_bins < 1:
        raise ConfigError("need at least one quantization bin")
    etas = np.asarray(etas, dtype=float)
    if etas.size == 0:
        raise ConfigError("cannot quantize an empty set of radii")
    lo_eta = float(etas.min())
    low = min(lo_eta - 1e-12, float(np.nextafter(lo_eta, -np.inf)))
    high = float(etas.max())
    return low + (high - low) * np.arange(n_bins) / n_bins


def quantize_eta(thresholds_row, eta: float) -> float:
    """Largest threshold strictly below ``eta``."""
    row = np.asarray(thresholds_row, dtype=float)
    below = row[row < eta]
    if below.size == 0:
        raise ConfigError(f"radius {eta} is not above the smallest threshold {row.min()}")
    return float(below.max())


def precertified_set(certs: Sequence[Optional[InterfaceCert]], threat: ThreatModel, targets: Sequence[int] | None = None) -> list[int]:
    """Targeted, non-abstained predictions whose certificate covers the whole ball."""
    targets = range(len(certs)) if targets is None else targets
    return [n for n in sorted(set(targets)) if certs[n] is not None and robust_to_ball(certs[n], threat.epsilon, threat.domain)]


def naive_count(certs: Sequence[Optional[InterfaceCert]], threat: ThreatModel, targets: Sequence[int] | None = None) -> int:
    return len(precertified_set(certs, threat, targets))


@dataclass(frozen=True, eq=False)
class CollectiveProblem:
    """Reduced program data.

    ``groups`` lists ``(output_subset, threshold, count)`` for the predictions
    that still need the solver. ``input_caps`` holds the per-group upper bound
    on budget in the binary domain and is ``None`` for continuous data.
    """

    weights: np.ndarray
    groups: tuple
    cap: float
    input_caps: Optional[np.ndarray]
    n_precertified: int
    n_targeted: int
    domain: str

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    def to_program(self, mode: str) -> MixedProgram:
        if mode not in ("relaxed", "exact"):
            raise ConfigError(f"unknown solve mode {mode!r}")
        n_in, n_groups = self.n_inputs, len(self.groups)
        c = np.concatenate([np.zeros(n_in), [float(g[2]) for g in self.groups]])
        rows, rhs, senses = [], [], []
        for k, (subset, threshold, _) in enumerate(self.groups):
            row = np.zeros(n_in + n_groups)
            row[:n_in] = self.weights[subset]
            row[n_in + k] = threshold
            rows.append(row)
            rhs.append(threshold)
            senses.append(">=")
        budget = np.zeros(n_in + n_groups)
        budget[:n_in] = 1.0
        rows.append(budget)
        rhs.append(self.cap)
        senses.append("<=")
        if self.input_caps is None:
            b_upper = np.full(n_in, self.cap)
        else:
            b_upper = np.minimum(self.input_caps, self.cap)
        lower = np.zeros(n_in + n_groups)
        upper = np.concatenate([b_upper, np.ones(n_groups)])
        lp = LinearProgram(c, np.array(rows), np.array(rhs), tuple(senses), lower, upper)
        if mode == "relaxed":
            return MixedProgram(lp)
        binary = tuple(range(n_in, n_in + n_groups))
        integer = tuple(range(n_in)) if self.domain == "binary" else ()
        return MixedProgram(lp, binary=binary, integer=integer)


def _check_weights(certs, partitioning: Partitioning, targets: set) -> np.ndarray:
    d_in = None
    rows = []
    for i, subset in enumerate(partitioning.output_subsets):
        present = [certs[n] for n in subset if certs[n] is not None]
        if not present:
            rows.append(None)
            continue
        ref = present[0].weights
        d_in = ref.size
        for cert in present[1:]:
            if not np.array_equal(cert.weights, ref):
                raise ConfigError(f"outputs of output subset {i} do not share one weight vector")
        reduced = []
        for l, inputs in enumerate(partitioning.input_subsets):
            values = ref[list(inputs)]
            if np.any(values != values[0]):
                raise ConfigError(f"weights of output subset {i} vary inside input subset {l}")
            reduced.append(values[0])
        rows.append(np.array(reduced))
    n_in = len(partitioning.input_subsets)
    if d_in is not None and sum(len(s) for s in partitioning.input_subsets) != d_in:
        raise ConfigError("input subsets do not cover the certificate dimension")
    return np.array([r if r is not None else np.zeros(n_in) for r in rows]).reshape(len(rows), n_in)


def build_problem(
    certs: Sequence[Optional[InterfaceCert]],
    threat: ThreatModel,
    targets: Sequence[int] | None = None,
    partitioning: Partitioning | None = None,
    n_bins: int | None = None,
) -> CollectiveProblem:
    """Assemble the reduced collective program.

    Without ``partitioning`` each output and each input dimension forms its
    own group. Without thresholds or ``n_bins`` the exact radii are used.
    """
    d_out = len(certs)
    present = [c for c in certs if c is not None]
    if partitioning is None:
        d_in = present[0].weights.size if present else 1
        partitioning = Partitioning.unreduced(d_out, d_in)
    if sum(len(s) for s in partitioning.output_subsets) != d_out:
        raise ConfigError("output subsets do not cover all predictions")
    for cert in present:
        if not isinstance(cert, InterfaceCert):
            raise ConfigError("collective programs need interface certificates")
        if cert.p != threat.p:
            raise ConfigError(f"certificate exponent {cert.p} differs from threat exponent {threat.p}")
    targets = set(range(d_out)) if targets is None else set(int(t) for t in targets)
    if any(not 0 <= t < d_out for t in targets):
        raise InputError("target index out of range")
    weights = _check_weights(certs, partitioning, targets)
    precert = set(precertified_set(certs, threat, targets))
    active = sorted(t for t in targets if certs[t] is not None and t not in precert)

    counts: dict[tuple[int, float], int] = {}
    for i, subset in enumerate(partitioning.output_subsets):
        members = [n for n in subset if n in active]
        if not members:
            continue
        if partitioning.thresholds is not None:
            row = partitioning.thresholds[i]
        elif n_bins is not None:
            row = quantization_thresholds([certs[n].eta for n in subset if certs[n] is not None], n_bins)
        else:
            row = None
        for n in members:
            level = certs[n].eta if row is None else quantize_eta(row, certs[n].eta)
            counts[(i, level)] = counts.get((i, level), 0) + 1
    groups = tuple((i, level, count) for (i, level), count in sorted(counts.items()))
    caps = None
    if threat.domain == "binary":
        caps = np.array([float(len(s)) for s in partitioning.input_subsets])
    return CollectiveProblem(
        weights=weights,
        groups=groups,
        cap=threat.cap,
        input_caps=caps,
        n_precertified=len(precert),
        n_targeted=len([t for t in targets if certs[t] is not None]),
        domain=threat.domain,
    )


@dataclass(frozen=True, eq=False)
class CollectiveBound:
    value: int
    n_precertified: int
    objective: float
    status: str
    nodes: int = 0


def _floor_objective(objective: float) -> int:
    return int(math.floor(objective + FLOOR_SLACK))


def _solve(program: MixedProgram, mode: str, max_integer: int) -> SolveResult:
    if mode == "relaxed":
        return solve_lp(program.lp)
    return solve_milp(program, max_integer=max_integer)


def solve_collective(problem: CollectiveProblem, mode: str = "relaxed", max_integer: int = 64) -> CollectiveBound:
    """Lower bound on the number of targeted predictions that stay robust."""
    if not problem.groups:
        return CollectiveBound(problem.n_precertified, problem.n_precertified, 0.0, "trivial")
    result = _solve(problem.to_program(mode), mode, max_integer)
    if result.status != "optimal":
        raise RuntimeError(f"collective program unexpectedly {result.status}")
    extra = _floor_objective(result.objective) if mode == "relaxed" else int(round(result.objective))
    return CollectiveBound(problem.n_precertified + extra, problem.n_precertified, result.objective, result.status, result.nodes)


def _top_k_positive(values: np.ndarray, k: int) -> float:
    if k <= 0 or values.size == 0:
        return 0.0
    top = np.sort(values)[::-1][:k]
    return float(np.sum(top[top > 0]))


def sparsity_precertified(cert: SparsityCert, x, eps_plus: int, eps_minus: int) -> bool:
    bits = np.asarray(x)
    worst = _top_k_positive(cert.w_plus[bits == 0], int(eps_plus)) + _top_k_positive(cert.w_minus[bits == 1], int(eps_minus))
    return worst < cert.eta


def sparsity_collective(
    certs: Sequence[Optional[SparsityCert]],
    x,
    eps_plus: int,
    eps_minus: int,
    targets: Sequence[int] | None = None,
    mode: str = "relaxed",
    max_integer: int = 64,
) -> CollectiveBound:
    """Collective bound when additions and deletions have separate budgets."""
    bits = np.asarray(x)
    if not np.all((bits == 0) | (bits == 1)):
        raise DomainError("sparsity-aware certification needs a binary input")
    if eps_plus < 0 or eps_minus < 0:
        raise ConfigError("budgets must be nonnegative")
    targets = range(len(certs)) if targets is None else targets
    live = [n for n in sorted(set(targets)) if certs[n] is not None]
    precert = [n for n in live if sparsity_precertified(certs[n], bits, eps_plus, eps_minus)]
    active = [n for n in live if n not in precert]
    if not active:
        return CollectiveBound(len(precert), len(precert), 0.0, "trivial")
    zeros = np.nonzero(bits == 0)[0]
    ones = np.nonzero(bits == 1)[0]
    n_add, n_del, n_t = zeros.size, ones.size, len(active)
    n_var = n_add + n_del + n_t
    rows, rhs, senses = [], [], []
    for k, n in enumerate(active):
        row = np.zeros(n_var)
        row[:n_add] = certs[n].w_plus[zeros]
        row[n_add:n_add + n_del] = certs[n].w_minus[ones]
        row[n_add + n_del + k] = certs[n].eta
        rows.append(row)
        rhs.append(certs[n].eta)
        senses.append(">=")
    for start, count, budget in ((0, n_add, eps_plus), (n_add, n_del, eps_minus)):
        row = np.zeros(n_var)
        row[start:start + count] = 1.0
        rows.append(row)
        rhs.append(float(math.floor(budget + 1e-12)))
        senses.append("<=")
    c = np.concatenate([np.zeros(n_add + n_del), np.ones(n_t)])
    lp = LinearProgram(c, np.array(rows), np.array(rhs), tuple(senses), np.zeros(n_var), np.ones(n_var))
    if mode == "relaxed":
        result = solve_lp(lp)
        extra = _floor_objective(result.objective)
    elif mode == "exact":
        result = solve_milp(MixedProgram(lp, binary=tuple(range(n_var))), max_integer=max_integer)
        extra = int(round(result.objective))
    else:
        raise ConfigError(f"unknown solve mode {mode!r}")
    return CollectiveBound(len(precert) + extra, len(precert), result.objective, result.status, result.nodes)


# --- metrics -----------------------------------------------------------------

def acr(epsilons, accuracies) -> float:
    """Average certifiable radius: lower Riemann sum under the accuracy curve.

    A trailing point with zero accuracy is appended when the curve has not
    reached zero by the last budget.
    """
    eps = np.asarray(epsilons, dtype=float)
    acc = np.asarray(accuracies, dtype=float)
    if eps.shape != acc.shape or eps.size == 0:
        raise InputError("budgets and accuracies must be nonempty and equally long")
    if np.any(np.diff(eps) <= 0):
        raise InputError("budget grid must be strictly ascending")
    if eps[0] != 0:
        raise InputError("budget grid must start at 0")
    if acc[-1] != 0:
        step = eps[-1] - eps[-2] if eps.size > 1 else 1.0
        eps = np.append(eps, eps[-1] + step)
        acc = np.append(acc, 0.0)
    return float(np.sum(eps[:-1] * (acc[:-1] - acc[1:])))


def certified_accuracy_naive(robust: Sequence[bool], correct: Sequence[bool], d_out: int) -> float:
    """Fraction of outputs that are correct and individually certified."""
    return sum(1 for r, c in zip(robust, correct) if r and c) / d_out


def certified_accuracy_count_only(n_robust: int, n_correct: int, d_out: int) -> float:
    """Accuracy bound from a certificate that only counts robust outputs among all of them."""
    return max(0, n_correct - (d_out - n_robust)) / d_out


def certified_accuracy_collective(n_robust_correct: int, d_out: int) -> float:
    """Accuracy from a collective bound computed with the correct outputs as targets."""
    return n_robust_correct / d_out


def default_epsilon_grid(domain: str, max_budget: int | None = None) -> np.ndarray:
    if domain == "binary":
        return np.arange(0, (max_budget or 0) + 1, dtype=float)
    return np.linspace(0.0, 4.0, 81)
