import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from locsmooth.errors import CapacityError, InputError
from locsmooth.lp_solver import FEAS_TOL, LinearProgram, MixedProgram, solve_lp, solve_milp, to_lp_format


def vertex_oracle(lp: LinearProgram):
    """Minimum over all basic feasible points; None when infeasible.

    Every variable must have a finite upper bound so the feasible set is a polytope.
    """
    n = lp.n_vars
    rows, rhs, eq = [], [], []
    for a, b, s in zip(lp.A, lp.b, lp.senses):
        rows.append(a if s != ">=" else -a)
        rhs.append(b if s != ">=" else -b)
        eq.append(s == "=")
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1
        rows += [e, -e]
        rhs += [lp.upper[j], -lp.lower[j]]
        eq += [False, False]
    G, h = np.array(rows).reshape(-1, n), np.array(rhs)
    forced = [i for i, flag in enumerate(eq) if flag]
    free = [i for i, flag in enumerate(eq) if not flag]
    best = None
    for extra in itertools.combinations(free, n - len(forced)) if len(forced) <= n else []:
        active = forced + list(extra)
        M = G[active]
        if np.linalg.matrix_rank(M) < n:
            continue
        x = np.linalg.solve(M, h[active])
        if np.all(G @ x <= h + 1e-7) and all(abs(G[i] @ x - h[i]) <= 1e-7 for i in forced):
            value = float(lp.c @ x)
            best = value if best is None else min(best, value)
    return best


def random_lp(rng, n=None, m=None, bounded=True):
    n = n or int(rng.integers(1, 7))
    m = int(rng.integers(0, 7)) if m is None else m
    A = rng.integers(-4, 5, (m, n)).astype(float)
    b = rng.integers(-6, 10, m).astype(float)
    senses = tuple(rng.choice(["<=", ">=", "="], m, p=[0.5, 0.35, 0.15]))
    lower = rng.integers(-2, 2, n).astype(float)
    upper = lower + rng.integers(0, 5, n) if bounded else np.full(n, np.inf)
    c = rng.integers(-5, 6, n).astype(float)
    return LinearProgram(c, A, b, senses, lower, upper)


def test_trivial_examples():
    res = solve_lp(LinearProgram([-1.0], np.zeros((0, 1)), [], (), [0.0], [1.0]))
    assert res.status == "optimal" and res.x[0] == 1.0 and res.objective == -1.0
    empty = solve_lp(LinearProgram(np.zeros(0), np.zeros((0, 0)), [], (), [], []))
    assert empty.status == "optimal" and empty.objective == 0.0


def toy_program():
    # variables b1, b2, t1, t2
    A = [[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0]]
    lp = LinearProgram([0, 0, 1, 1], A, [1, 1, 1], (">=", ">=", "<="), [0, 0, 0, 0], [1, 1, 1, 1])
    return MixedProgram(lp, binary=(2, 3))


def test_toy_program():
    mp = toy_program()
    assert solve_lp(mp.lp).objective == pytest.approx(1.0)
    assert vertex_oracle(mp.lp) == pytest.approx(1.0)
    exact = solve_milp(mp)
    assert exact.objective == pytest.approx(1.0)
    assert sorted(exact.x[2:]) == [0.0, 1.0]


def test_integral_root_needs_no_branching():
    lp = LinearProgram([1.0, 1.0], [[1, 1]], [1], (">=",), [0, 0], [1, 1])
    res = solve_milp(MixedProgram(lp, binary=(0, 1)))
    assert res.nodes == 0 and res.objective == 1.0


def test_knapsack_matches_enumeration():
    values, weights, cap = np.array([6.0, 5.0, 4.0]), np.array([4.0, 3.0, 3.0]), 6.0
    lp = LinearProgram(-values, [weights], [cap], ("<=",), np.zeros(3), np.ones(3))
    assert solve_lp(lp).objective == pytest.approx(-9.5)
    best = min(-values @ np.array(bits) for bits in itertools.product((0, 1), repeat=3) if weights @ np.array(bits) <= cap)
    res = solve_milp(MixedProgram(lp, binary=(0, 1, 2)))
    assert res.objective == best == -9.0
    assert res.nodes >= 1


def test_statuses():
    infeasible = LinearProgram([1.0], [[1.0]], [5.0], (">=",), [0.0], [1.0])
    assert solve_lp(infeasible).status == "infeasible"
    assert solve_milp(MixedProgram(infeasible, binary=(0,))).status == "infeasible"
    unbounded = LinearProgram([-1.0], [[1.0]], [0.0], (">=",), [0.0], [np.inf])
    assert solve_lp(unbounded).status == "unbounded"
    no_integer = LinearProgram([0.0], [[2.0]], [1.0], ("=",), [0.0], [3.0])
    assert solve_milp(MixedProgram(no_integer, integer=(0,))).status == "infeasible"


def test_input_validation():
    with pytest.raises(InputError):
        LinearProgram([1.0], [[1.0]], [1.0, 2.0], ("<=",), [0.0], [1.0])
    with pytest.raises(InputError):
        LinearProgram([1.0], [[1.0]], [1.0], ("<",), [0.0], [1.0])
    with pytest.raises(InputError):
        LinearProgram([1.0], [[1.0]], [1.0], ("<=",), [2.0], [1.0])
    with pytest.raises(InputError):
        LinearProgram([1.0], np.zeros((0, 1)), [], (), [-np.inf], [1.0])
    lp = LinearProgram([1.0], np.zeros((0, 1)), [], (), [0.0], [2.0])
    with pytest.raises(InputError):
        MixedProgram(lp, binary=(0,))
    with pytest.raises(InputError):
        MixedProgram(lp, integer=(3,))


def test_capacity_error():
    n = 5
    lp = LinearProgram(np.ones(n), np.zeros((0, n)), [], (), np.zeros(n), np.ones(n))
    with pytest.raises(CapacityError, match="relaxed"):
        solve_milp(MixedProgram(lp, binary=range(n)), max_integer=4)
    assert solve_milp(MixedProgram(lp, binary=range(n)), max_integer=5).status == "optimal"


def test_random_programs_match_vertex_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        lp = random_lp(rng)
        res = solve_lp(lp)
        oracle = vertex_oracle(lp)
        if oracle is None:
            assert res.status == "infeasible"
        else:
            assert res.status == "optimal"
            assert res.objective == pytest.approx(oracle, abs=1e-8)
            assert lp.max_violation(res.x) <= FEAS_TOL


def test_random_programs_agree_with_highs():
    rng = np.random.default_rng(77)
    for _ in range(150):
        lp = random_lp(rng)
        le = [i for i, s in enumerate(lp.senses) if s == "<="]
        ge = [i for i, s in enumerate(lp.senses) if s == ">="]
        eq = [i for i, s in enumerate(lp.senses) if s == "="]
        A_ub = np.vstack([lp.A[le], -lp.A[ge]]) if le or ge else None
        b_ub = np.concatenate([lp.b[le], -lp.b[ge]]) if le or ge else None
        ref = linprog(lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=lp.A[eq] if eq else None, b_eq=lp.b[eq] if eq else None,
                      bounds=list(zip(lp.lower, lp.upper)), method="highs")
        res = solve_lp(lp)
        if ref.status == 0:
            assert res.status == "optimal" and res.objective == pytest.approx(ref.fun, abs=1e-7)
        elif ref.status == 2:
            assert res.status == "infeasible"


def brute_force_milp(mp: MixedProgram):
    lp, integral = mp.lp, mp.integral
    best = None
    ranges = [range(int(np.ceil(lp.lower[i])), int(np.floor(lp.upper[i])) + 1) for i in integral]
    for values in itertools.product(*ranges):
        lo, hi = lp.lower.copy(), lp.upper.copy()
        lo[list(integral)] = values
        hi[list(integral)] = values
        value = vertex_oracle(lp.with_bounds(lo, hi))
        if value is not None:
            best = value if best is None else min(best, value)
    return best


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_milp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    lp = random_lp(rng, n=int(rng.integers(2, 5)))
    k = int(rng.integers(1, lp.n_vars + 1))
    picked = tuple(int(i) for i in rng.choice(lp.n_vars, k, replace=False))
    mp = MixedProgram(lp, integer=picked)
    res = solve_milp(mp)
    oracle = brute_force_milp(mp)
    if oracle is None:
        assert res.status == "infeasible"
        return
    assert res.status == "optimal"
    assert res.objective == pytest.approx(oracle, abs=1e-7)
    assert lp.max_violation(res.x) <= 1e-6
    assert np.all(res.x[list(picked)] == np.round(res.x[list(picked)]))
    assert res.objective >= solve_lp(lp).objective - 1e-9


def test_deterministic():
    rng = np.random.default_rng(3)
    for _ in range(20):
        lp = random_lp(rng)
        first, second = solve_lp(lp), solve_lp(lp)
        assert first.status == second.status
        assert np.array_equal(first.x, second.x) and (first.objective == second.objective or first.status != "optimal")
        mp = MixedProgram(lp, integer=(0,))
        a, b = solve_milp(mp), solve_milp(mp)
        assert np.array_equal(a.x, b.x) and a.nodes == b.nodes


def test_degenerate_program_terminates():
    # A classic cycling example for the largest-coefficient rule.
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    lp = LinearProgram(c, A, [0, 0, 1], ("<=", "<=", "<="), np.zeros(4), np.full(4, np.inf))
    res = solve_lp(lp)
    assert res.status == "optimal" and res.objective == pytest.approx(-0.05)


def test_lp_format():
    text = to_lp_format(toy_program(), ["b1", "b2", "t1", "t2"])
    assert text.startswith("Minimize\n obj: 1.0 t1 + 1.0 t2\nSubject To\n")
    assert " c0: 1.0 b1 + 1.0 t1 >= 1.0" in text
    assert " c2: 1.0 b1 + 1.0 b2 <= 1.0" in text
    assert "Binary\n t1 t2\nEnd\n" in text
    unbounded = LinearProgram([-1.0], np.zeros((0, 1)), [], (), [0.0], [np.inf])
    assert "0.0 <= x0 <= +inf" in to_lp_format(unbounded)
