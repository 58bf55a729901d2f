"""Dense two-phase simplex and best-first branch and bound.

Intended for the small programs produced by collective certification: a few
dozen variables and constraints. Pivoting follows Bland's rule throughout,
which rules out cycling and makes results reproducible bit for bit.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, InputError

FEAS_TOL = 1e-8
INT_TOL = 1e-6
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_SENSES = ("<=", ">=", "=")


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Minimize ``c @ x`` subject to ``A x (sense) b`` and ``lower <= x <= upper``."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    senses: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.b), 0))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        senses = tuple(self.senses)
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if A.shape[0] != b.size or len(senses) != b.size:
            raise InputError("constraint matrix, right-hand sides and senses disagree in length")
        if lower.size != n or upper.size != n:
            raise InputError("bounds must have one entry per variable")
        if any(s not in _SENSES for s in senses):
            raise InputError(f"senses must be among {_SENSES}")
        if np.any(~np.isfinite(lower)):
            raise InputError("lower bounds must be finite")
        if np.any(lower > upper):
            raise InputError("every lower bound must not exceed its upper bound")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise InputError("program data must be finite")
        for name, value in (("c", c), ("A", A), ("b", b), ("senses", senses), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, value)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def with_bounds(self, lower, upper) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.b, self.senses, lower, upper)

    def max_violation(self, x) -> float:
        """Largest constraint or bound violation at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = max(0.0, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        lhs = self.A @ x if self.n_rows else np.zeros(0)
        for value, rhs, sense in zip(lhs, self.b, self.senses):
            if sense == "<=":
                worst = max(worst, value - rhs)
            elif sense == ">=":
                worst = max(worst, rhs - value)
            else:
                worst = max(worst, abs(value - rhs))
        return worst


@dataclass(frozen=True, eq=False)
class MixedProgram:
    """A linear program where some variables must take integer values."""

    lp: LinearProgram
    binary: tuple = ()
    integer: tuple = ()

    def __post_init__(self):
        binary = tuple(sorted(int(i) for i in self.binary))
        integer = tuple(sorted(int(i) for i in self.integer))
        n = self.lp.n_vars
        if set(binary) & set(integer):
            raise InputError("a variable cannot be both binary and general integer")
        if any(not 0 <= i < n for i in binary + integer):
            raise InputError("integer variable index out of range")
        for i in binary:
            if self.lp.lower[i] < 0 or self.lp.upper[i] > 1:
                raise InputError(f"binary variable {i} must be bounded within [0, 1]")
        object.__setattr__(self, "binary", binary)
        object.__setattr__(self, "integer", integer)

    @property
    def integral(self) -> tuple:
        return tuple(sorted(self.binary + self.integer))


@dataclass(frozen=True, eq=False)
class SolveResult:
    status: str
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = math.nan
    nodes: int = 0


def _pivot(tab: np.ndarray, row: int, col: int):
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0


def _run_simplex(tab: np.ndarray, basis: list, n_cols: int, allowed: np.ndarray) -> str:
    """Optimize in place. The last tableau row holds reduced costs, last column rhs."""
    m = tab.shape[0] - 1
    while True:
        costs = tab[m, :n_cols]
        candidates = np.nonzero(allowed & (costs < -_COST_TOL))[0]
        if candidates.size == 0:
            return "optimal"
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.nonzero(column > _PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded"
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col


def solve_lp(lp: LinearProgram) -> SolveResult:
    """Solve a linear program exactly up to floating-point tolerance."""
    n = lp.n_vars
    shift = lp.lower
    rows, rhs, senses = [], [], []
    base_rhs = lp.b - (lp.A @ shift if n else 0.0)
    for i in range(lp.n_rows):
        rows.append(lp.A[i])
        rhs.append(base_rhs[i])
        senses.append(lp.senses[i])
    for j in range(n):
        if np.isfinite(lp.upper[j]):
            unit = np.zeros(n)
            unit[j] = 1.0
            rows.append(unit)
            rhs.append(lp.upper[j] - lp.lower[j])
            senses.append("<=")
    m = len(rows)
    if m == 0:
        if np.any(lp.c < 0):
            return SolveResult("unbounded")
        x = shift.copy()
        return SolveResult("optimal", x, float(lp.c @ x))

    coeffs = np.array(rows, dtype=float).reshape(m, n)
    rhs = np.array(rhs, dtype=float)
    for i in range(m):
        if rhs[i] < 0:
            coeffs[i] = -coeffs[i]
            rhs[i] = -rhs[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    n_slack = sum(1 for s in senses if s != "=")
    n_art = sum(1 for s in senses if s != "<=")
    n_cols = n + n_slack + n_art
    tab = np.zeros((m + 1, n_cols + 1))
    tab[:m, :n] = coeffs
    tab[:m, -1] = rhs
    basis = [0] * m
    artificial = np.zeros(n_cols, dtype=bool)
    slack_col, art_col = n, n + n_slack
    for i, sense in enumerate(senses):
        if sense == "<=":
            tab[i, slack_col] = 1.0
            basis[i] = slack_col
            slack_col += 1
            continue
        if sense == ">=":
            tab[i, slack_col] = -1.0
            slack_col += 1
        tab[i, art_col] = 1.0
        basis[i] = art_col
        artificial[art_col] = True
        art_col += 1

    if n_art:
        # Phase one: minimize the sum of artificial variables.
        tab[m, :] = 0.0
        for i in range(m):
            if artificial[basis[i]]:
                tab[m, :] -= tab[i, :]
        tab[m, :n_cols][artificial] = 0.0
        _run_simplex(tab, basis, n_cols, np.ones(n_cols, dtype=bool))
        if -tab[m, -1] > FEAS_TOL:
            return SolveResult("infeasible")
        keep = []
        for i in range(m):
            if artificial[basis[i]]:
                options = np.nonzero(~artificial & (np.abs(tab[i, :n_cols]) > _PIVOT_TOL))[0]
                if options.size == 0:
                    continue  # redundant constraint
                _pivot(tab, i, int(options[0]))
                basis[i] = int(options[0])
            keep.append(i)
        tab = np.vstack([tab[keep], tab[m:m + 1]])
        basis = [basis[i] for i in keep]
        m = len(keep)

    cost = np.zeros(n_cols)
    cost[:n] = lp.c
    tab[m, :n_cols] = cost
    tab[m, -1] = 0.0
    for i in range(m):
        if cost[basis[i]] != 0.0:
            tab[m, :] -= cost[basis[i]] * tab[i, :]
    status = _run_simplex(tab, basis, n_cols, ~artificial)
    if status == "unbounded":
        return SolveResult("unbounded")
    y = np.zeros(n_cols)
    for i in range(m):
        y[basis[i]] = tab[i, -1]
    x = shift + y[:n]
    x = np.minimum(np.maximum(x, lp.lower), lp.upper)
    return SolveResult("optimal", x, float(lp.c @ x))


def _most_fractional(x: np.ndarray, integral: Sequence[int]) -> int | None:
    best, best_gap = None, INT_TOL
    for i in integral:
        frac = x[i] - math.floor(x[i])
        gap = min(frac, 1.0 - frac)
        if gap > best_gap + 1e-15:
            best, best_gap = i, gap
    return best


def solve_milp(mp: MixedProgram, gap_tol: float = 0.0, max_integer: int = 64) -> SolveResult:
    """Best-first branch and bound, branching on the most fractional variable.

    Integer variables of the returned solution are snapped to the nearest
    integer. ``nodes`` counts branchings performed.
    """
    integral = mp.integral
    if len(integral) > max_integer:
        raise CapacityError(
            f"{len(integral)} integer variables exceed the cap of {max_integer}; "
            "use the relaxed mode or coarser quantization"
        )
    root = solve_lp(mp.lp)
    if root.status != "optimal":
        return root
    heap = [(root.objective, 0, mp.lp.lower.copy(), mp.lp.upper.copy(), root)]
    counter = 1
    branches = 0
    best: SolveResult | None = None
    while heap:
        bound, _, lower, upper, node = heapq.heappop(heap)
        if best is not None and bound >= best.objective - gap_tol - 1e-9:
            break
        var = _most_fractional(node.x, integral)
        if var is None:
            x = node.x.copy()
            x[list(integral)] = np.round(x[list(integral)])
            candidate = SolveResult("optimal", x, float(mp.lp.c @ x))
            if best is None or candidate.objective < best.objective:
                best = candidate
            continue
        branches += 1
        value = node.x[var]
        for side in ("down", "up"):
            lo, hi = lower.copy(), upper.copy()
            if side == "down":
                hi[var] = math.floor(value)
            else:
                lo[var] = math.ceil(value)
            if lo[var] > hi[var]:
                continue
            child = solve_lp(mp.lp.with_bounds(lo, hi))
            if child.status != "optimal":
                continue
            if best is not None and child.objective >= best.objective - gap_tol - 1e-9:
                continue
            heapq.heappush(heap, (child.objective, counter, lo, hi, child))
            counter += 1
    if best is None:
        return SolveResult("infeasible", nodes=branches)
    return SolveResult("optimal", best.x, best.objective, nodes=branches)


def _format_terms(coeffs, names) -> str:
    parts = []
    for coef, name in zip(coeffs, names):
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {abs(float(coef))!r} {name}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def to_lp_format(mp: LinearProgram | MixedProgram, names: Sequence[str] | None = None) -> str:
    """Render a program in the CPLEX LP text format."""
    if isinstance(mp, LinearProgram):
        mp = MixedProgram(mp)
    lp = mp.lp
    names = list(names) if names is not None else [f"x{i}" for i in range(lp.n_vars)]
    lines = ["Minimize", " obj: " + _format_terms(lp.c, names), "Subject To"]
    for i in range(lp.n_rows):
        lines.append(f" c{i}: {_format_terms(lp.A[i], names)} {lp.senses[i]} {float(lp.b[i])!r}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = float(lp.lower[j]), float(lp.upper[j])
        upper = "+inf" if math.isinf(hi) else repr(hi)
        lines.append(f" {lo!r} <= {name} <= {upper}")
    if mp.integer:
        lines.append("General")
        lines.append(" " + " ".join(names[i] for i in mp.integer))
    if mp.binary:
        lines.append("Binary")
        lines.append(" " + " ".join(names[i] for i in mp.binary))
    lines.append("End")
    return "\n".join(lines) + "\n"
