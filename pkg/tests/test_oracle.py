import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logit

from instances import random_instance
from locsmooth.collective import ThreatModel
from locsmooth.distributions import BernoulliFlip, LocalizedScheme, SparsityAware, sample
from locsmooth.errors import CapacityError
from locsmooth.models import SoftLogistic, WindowMajority, predict_batch
from locsmooth.numerics import RngStream
from locsmooth.oracle import (
    all_binary_inputs,
    check_instance,
    exact_likelihood_ratio,
    exact_smoothed_stats,
    exhaustive_attack,
    perturbations,
)


def constant_model(d_in, value):
    return SoftLogistic((1, d_in), (0,), 1.0, np.zeros((1, d_in)), bias=[logit(value)])


def test_all_binary_inputs():
    assert all_binary_inputs(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    with pytest.raises(CapacityError):
        all_binary_inputs(17)


def test_constant_model_stats():
    stats = exact_smoothed_stats(constant_model(4, 0.9), BernoulliFlip(np.full(4, 0.2)), np.zeros(4), nu=0.3)
    assert stats.mu[0] == pytest.approx(0.9)
    assert stats.zeta[0] == pytest.approx(0.36)
    assert stats.q[0].sum() == pytest.approx(1.0)


def test_uniform_mixture_gives_plain_average():
    model = WindowMajority.line(5, (1, 3), 1)
    stats = exact_smoothed_stats(model, BernoulliFlip(np.full(5, 0.5)), np.array([1, 0, 1, 1, 0]))
    plain = predict_batch(model, all_binary_inputs(5)).mean(axis=0)
    assert np.allclose(stats.expected, plain)


def test_window_majority_matches_sampling():
    model = WindowMajority.line(6, (2,), 2)
    dist = BernoulliFlip(np.full(6, 0.2))
    x = np.array([1, 0, 1, 1, 0, 1])
    stats = exact_smoothed_stats(model, dist, x)
    n = 1_000_000
    draws = sample(dist, x, RngStream(7, 1), n)
    frac = predict_batch(model, draws)[:, 0, stats.labels[0]]
    sigma = frac.std() / math.sqrt(n)
    assert abs(frac.mean() - stats.mu[0]) <= 4 * sigma


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 1))
def test_variance_dominates_squared_offset(seed, nu):
    model, scheme, x = random_instance(seed, d_range=(2, 8))
    stats = exact_smoothed_stats(model, scheme.distribution_for(0), x, nu=nu)
    assert np.allclose(stats.q.sum(axis=1), 1.0)
    assert np.all(stats.zeta >= (stats.mu - nu) ** 2 - 1e-12)


def test_likelihood_ratio_examples():
    dist = BernoulliFlip(np.full(3, 0.1))
    x = np.array([0, 1, 0])
    assert exact_likelihood_ratio(dist, x, x) == pytest.approx(1.0)
    flipped = np.array([1, 1, 0])
    assert exact_likelihood_ratio(dist, x, flipped) == pytest.approx(0.81 / 0.1 + 0.01 / 0.9, rel=1e-12)
    assert exact_likelihood_ratio(dist, x, flipped) == pytest.approx(8.1111111, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2 ** 31), st.booleans())
def test_likelihood_ratio_product_form(d, seed, sparse):
    rng = np.random.default_rng(seed)
    x, x_prime = rng.integers(0, 2, d), rng.integers(0, 2, d)
    if sparse:
        tp, tm = rng.uniform(0.01, 0.99, d), rng.uniform(0.01, 0.99, d)
        dist = SparsityAware(tp, tm)
        add = (x == 0) & (x_prime == 1)
        rem = (x == 1) & (x_prime == 0)
        closed = np.prod((tm ** 2 / (1 - tp) + (1 - tm) ** 2 / tp)[add]) * np.prod(((1 - tp) ** 2 / tm + tp ** 2 / (1 - tm))[rem])
    else:
        theta = rng.uniform(0.01, 0.99, d)
        dist = BernoulliFlip(theta)
        closed = np.prod(((1 - theta) ** 2 / theta + theta ** 2 / (1 - theta))[x != x_prime])
    rho = exact_likelihood_ratio(dist, x, x_prime)
    assert rho == pytest.approx(closed, rel=1e-10)
    assert rho >= 1 - 1e-12


def test_perturbation_enumeration():
    x = np.array([0, 1, 0])
    assert len(list(perturbations(x, epsilon=0))) == 1
    assert len(list(perturbations(x, epsilon=2))) == 1 + 3 + 3
    split = list(perturbations(x, eps_plus=1, eps_minus=0))
    assert [p.tolist() for p in split] == [[0, 1, 0], [1, 1, 0], [0, 1, 1]]
    assert len(list(perturbations(x, eps_plus=2, eps_minus=1))) == 4 * 2


def test_exhaustive_attack_examples():
    model = WindowMajority.line(2, (0, 1), 0)
    scheme = LocalizedScheme.per_output([BernoulliFlip([0.1, 0.5]), BernoulliFlip([0.5, 0.1])])
    x = np.array([1, 1])
    assert exhaustive_attack(model, scheme, x, ThreatModel(0, 0, "binary")) == 2
    assert exhaustive_attack(model, scheme, x, ThreatModel(0, 1, "binary")) == 1
    assert exhaustive_attack(model, scheme, x, ThreatModel(0, 2, "binary")) == 0
    assert exhaustive_attack(model, scheme, x, ThreatModel(0, 2, "binary"), targets=[]) == 0


@pytest.mark.parametrize("seed", range(15))
def test_attack_monotone_in_budget(seed):
    model, scheme, x = random_instance(seed)
    counts = [exhaustive_attack(model, scheme, x, ThreatModel(0, b, "binary")) for b in range(4)]
    assert counts[0] == scheme.d_out
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_caps_are_errors():
    big = WindowMajority.line(13, (6,), 1)
    scheme = LocalizedScheme.per_output([BernoulliFlip(np.full(13, 0.2))])
    with pytest.raises(CapacityError):
        exhaustive_attack(big, scheme, np.zeros(13), ThreatModel(0, 1, "binary"))
    small = WindowMajority.line(5, (2,), 1)
    with pytest.raises(CapacityError):
        exhaustive_attack(small, LocalizedScheme.per_output([BernoulliFlip(np.full(5, 0.2))]), np.zeros(5), ThreatModel(0, 5, "binary"))


def fault_fixture():
    model = SoftLogistic((1, 1), (0,), 1.0, [[-1.0]], 2.0, [1.5])
    return model, LocalizedScheme.per_output([BernoulliFlip([0.2])]), np.array([0])


def test_harness_passes_on_sound_certificates():
    model, scheme, x = fault_fixture()
    report = check_instance(model, scheme, x, max_budget=1)
    assert report.ok and report.checks > 0


def test_harness_catches_inflated_radius():
    model, scheme, x = fault_fixture()
    report = check_instance(model, scheme, x, max_budget=1, eta_scale=1.1)
    assert not report.ok
    assert any("exceeds" in v or "covers" in v for v in report.violations)
