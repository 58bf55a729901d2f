import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from locsmooth.errors import DomainError, InputError
from locsmooth.monte_carlo import (
    CdfBounds,
    ScoreBatch,
    VoteBatch,
    abstain,
    candidate_label,
    clopper_pearson_lower,
    correction,
    default_thresholds,
    dkw_bounds,
    dkw_margin,
    mean_lower,
    second_moment_upper,
)


def binomial_tail_lower(k, n, alpha):
    """Smallest p with Pr[Bin(n, p) >= k] >= alpha, by bisection."""
    mpmath.mp.dps = 40

    def upper_tail(p):
        return mpmath.fsum(mpmath.binomial(n, j) * p ** j * (1 - p) ** (n - j) for j in range(k, n + 1))

    lo, hi = mpmath.mpf(0), mpmath.mpf(1)
    for _ in range(80):
        mid = (lo + hi) / 2
        if upper_tail(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def envelope(taus, lower, upper=None):
    taus = np.asarray(taus, float)
    lower = np.asarray(lower, float)
    upper = lower if upper is None else np.asarray(upper, float)
    return CdfBounds(taus, lower, 0.0, lower, upper, 0.05)


def exact_cdf(values, probs, taus):
    values, probs = np.asarray(values), np.asarray(probs)
    return np.array([probs[values <= t].sum() for t in taus])


def test_candidate_label_examples():
    assert candidate_label(VoteBatch([7, 3])) == 0
    assert candidate_label(VoteBatch([5, 5])) == 0
    assert candidate_label(np.array([0.4, 0.6])) == 1
    assert candidate_label(np.array([[0.2, 0.8], [0.6, 0.4]])) == 1
    assert candidate_label(VoteBatch.from_labels([1, 1, 0], 2)) == 1
    with pytest.raises(InputError):
        candidate_label(VoteBatch([0, 0]))
    with pytest.raises(InputError):
        candidate_label(np.array([]))


def test_clopper_pearson_examples():
    assert clopper_pearson_lower(0, 50, 0.01) == 0.0
    assert clopper_pearson_lower(100, 100, 0.01) == pytest.approx(0.01 ** (1 / 100), abs=1e-6)
    assert clopper_pearson_lower(100, 100, 0.01) == pytest.approx(0.954993, abs=1e-6)
    assert clopper_pearson_lower(90, 100, 0.05) == pytest.approx(binomial_tail_lower(90, 100, 0.05), abs=1e-6)
    with pytest.raises(DomainError):
        clopper_pearson_lower(5, 4, 0.05)
    with pytest.raises(DomainError):
        clopper_pearson_lower(1, 4, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 60), st.data(), st.sampled_from([0.001, 0.01, 0.05, 0.2]))
def test_clopper_pearson_matches_bisection(n, data, alpha):
    k = data.draw(st.integers(1, n))
    assert clopper_pearson_lower(k, n, alpha) == pytest.approx(binomial_tail_lower(k, n, alpha), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 500), st.data(), st.floats(1e-4, 0.5), st.floats(1e-4, 0.5))
def test_clopper_pearson_monotone(n, data, a1, a2):
    k = data.draw(st.integers(0, n))
    assert clopper_pearson_lower(k, n, min(a1, a2)) <= clopper_pearson_lower(k, n, max(a1, a2))
    if k < n:
        assert clopper_pearson_lower(k, n, a1) <= clopper_pearson_lower(k + 1, n, a1)


def test_clopper_pearson_coverage():
    rng = np.random.default_rng(11)
    q, n, alpha, trials = 0.8, 200, 0.05, 10_000
    ks = rng.binomial(n, q, trials)
    table = {k: clopper_pearson_lower(int(k), n, alpha) for k in np.unique(ks)}
    covered = np.mean([table[k] <= q for k in ks])
    assert covered >= 0.94


def test_correction_examples():
    assert np.allclose(correction(0.05, 5, "bonferroni"), 0.01)
    assert np.allclose(correction(0.05, 3, "holm", [9, 7, 8]), [0.05 / 3, 0.05, 0.025])
    assert correction(0.05, 1, "holm", [4])[0] == 0.05
    assert correction(0.05, 1, "bonferroni")[0] == 0.05
    assert np.allclose(correction(0.06, 3, "holm", [5, 5, 5]), [0.02, 0.03, 0.06])
    with pytest.raises(InputError):
        correction(0.05, 3, "holm")
    with pytest.raises(InputError):
        correction(0.05, 3, "sidak")
    with pytest.raises(InputError):
        correction(0.05, 0, "bonferroni")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=20), st.floats(1e-4, 0.5))
def test_holm_dominates_bonferroni(counts, alpha):
    holm = correction(alpha, len(counts), "holm", counts)
    bonf = correction(alpha, len(counts), "bonferroni")
    assert np.all(holm >= bonf)
    ranked = holm[np.argsort(-np.asarray(counts), kind="stable")]
    assert np.all(np.diff(ranked) >= 0)
    assert sorted(holm) == pytest.approx(sorted(alpha / np.arange(len(counts), 0, -1)))


def test_dkw_margin_examples():
    assert dkw_margin(5000, 0.01) == pytest.approx(math.sqrt(math.log(200) / 10000), abs=1e-12)
    assert dkw_margin(5000, 0.01) == pytest.approx(0.023018, abs=1e-6)
    for bad in (0.0, 1.0, 2.0):
        with pytest.raises(DomainError):
            dkw_margin(10, bad)
    with pytest.raises(InputError):
        dkw_margin(0, 0.1)


def test_dkw_bounds_errors():
    batch = ScoreBatch([0.2, 0.4])
    with pytest.raises(InputError):
        dkw_bounds(batch, [0.5, 0.2], 0.05)
    with pytest.raises(InputError):
        dkw_bounds(batch, [], 0.05)
    with pytest.raises(InputError):
        ScoreBatch([1.2])
    with pytest.raises(InputError):
        dkw_bounds(ScoreBatch([]), [0.5], 0.05)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.integers(2, 30), st.floats(1e-3, 0.5))
def test_dkw_band_shape(scores, m, alpha):
    bounds = dkw_bounds(ScoreBatch(scores), default_thresholds(m), alpha)
    for arr in (bounds.lower, bounds.empirical, bounds.upper):
        assert np.all((arr >= 0) & (arr <= 1))
        assert np.all(np.diff(arr) >= 0)
    assert np.all(bounds.lower <= bounds.empirical) and np.all(bounds.empirical <= bounds.upper)
    expected = [np.mean(np.asarray(scores) <= t) for t in bounds.thresholds]
    assert np.allclose(bounds.empirical, expected)


def test_dkw_band_coverage():
    rng = np.random.default_rng(5)
    values, probs = np.array([0.0, 0.3, 0.55, 0.9, 1.0]), np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    taus = default_thresholds(51)
    truth = exact_cdf(values, probs, taus)
    alpha, trials, n = 0.1, 10_000, 200
    hits = 0
    for _ in range(trials):
        bounds = dkw_bounds(ScoreBatch(rng.choice(values, n, p=probs)), taus, alpha)
        hits += bool(np.all(bounds.lower <= truth + 1e-12) and np.all(truth <= bounds.upper + 1e-12))
    assert hits / trials >= 1 - alpha - 0.01


def riemann_mean_lower(taus, upper):
    total, prev = 0.0, 0.0
    for tau, f in zip(taus, upper):
        total += (tau - prev) * (1.0 - f)
        prev = tau
    return min(max(total, 0.0), 1.0)


def corner_second_moment(taus, lower, upper, nu):
    edges = [0.0, *taus, 1.0]
    xi = [max((a - nu) ** 2, (b - nu) ** 2) for a, b in zip(edges, edges[1:])]
    best = -math.inf
    for choice in itertools.product((0, 1), repeat=len(taus)):
        cdf = [0.0] + [upper[m] if c else lower[m] for m, c in enumerate(choice)] + [1.0]
        best = max(best, sum(x * (cdf[m + 1] - cdf[m]) for m, x in enumerate(xi)))
    return best


def test_mean_lower_examples():
    taus = np.linspace(0, 1, 5)
    assert mean_lower(envelope(taus, np.ones(5))) == 0.0
    assert mean_lower(envelope(taus, np.zeros(5))) == 1.0
    exact = exact_cdf([0.7], [1.0], taus)
    assert mean_lower(envelope(taus, exact)) == pytest.approx(riemann_mean_lower(taus, exact))
    assert mean_lower(envelope(taus, exact)) == pytest.approx(0.5)
    assert mean_lower(envelope(taus, exact)) <= 0.7


def test_second_moment_examples():
    assert second_moment_upper(envelope([], [], []), 0.0) == 1.0
    assert second_moment_upper(envelope([1.0], [1.0]), 0.0) == 1.0
    taus = np.linspace(0, 1, 5)
    exact = exact_cdf([0.5], [1.0], taus)
    value = second_moment_upper(envelope(taus, exact), 0.5)
    assert value == pytest.approx(0.0625)
    assert value >= 0.0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 8), st.floats(0, 1), st.floats(0, 0.3))
def test_moment_bounds_against_oracles(seed, m, nu, width):
    rng = np.random.default_rng(seed)
    taus = np.sort(rng.uniform(0, 1, m))
    values = rng.uniform(0, 1, 4)
    probs = rng.dirichlet(np.ones(4))
    truth = exact_cdf(values, probs, taus)
    lower, upper = np.clip(truth - width, 0, 1), np.clip(truth + width, 0, 1)
    bounds = envelope(taus, lower, upper)
    assert mean_lower(bounds) == pytest.approx(riemann_mean_lower(taus, upper), abs=1e-12)
    assert second_moment_upper(bounds, nu) == pytest.approx(corner_second_moment(taus, lower, upper, nu), abs=1e-12)
    assert mean_lower(bounds) <= float(values @ probs) + 1e-12
    assert second_moment_upper(bounds, nu) >= float(((values - nu) ** 2) @ probs) - 1e-12


def test_moment_bounds_cover_under_sampling():
    rng = np.random.default_rng(9)
    values, probs = np.array([0.1, 0.45, 0.8, 0.95]), np.array([0.1, 0.2, 0.3, 0.4])
    mean = float(values @ probs)
    nu = 0.6
    second = float(((values - nu) ** 2) @ probs)
    alpha, trials, taus = 0.1, 2000, default_thresholds(51)
    hits = 0
    for _ in range(trials):
        bounds = dkw_bounds(ScoreBatch(rng.choice(values, 300, p=probs)), taus, alpha)
        hits += mean_lower(bounds) <= mean and second_moment_upper(bounds, nu) >= second
    assert hits / trials >= 1 - alpha - 0.02


def test_abstain_examples():
    assert abstain(0.5) and abstain(0.0) and abstain(float("nan"))
    assert not abstain(0.500001)
