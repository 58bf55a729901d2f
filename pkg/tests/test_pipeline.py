import json
from pathlib import Path

import numpy as np
import pytest

from locsmooth.collective import ThreatModel
from locsmooth.config import load_config, with_overrides
from locsmooth.oracle import exact_certificates, exhaustive_attack
from locsmooth.pipeline import (
    build_setup,
    draw_samples,
    expand_grid,
    pareto_dominated,
    run_certify,
    stream_id,
    write_outputs,
)

ROOT = Path(__file__).resolve().parents[1]


def cfg_of(name, **overrides):
    cfg = load_config(ROOT / "configs" / f"{name}.toml")
    return with_overrides(cfg, overrides) if overrides else cfg


def test_stream_ids_are_distinct():
    ids = {stream_id(a, i, p) for a in range(50) for i in range(40) for p in range(2)}
    assert len(ids) == 50 * 40 * 2


@pytest.mark.parametrize("name", ["gaussian_grid", "bernoulli_oracle", "sparsity_cluster"])
def test_reports_are_byte_identical(name, tmp_path):
    cfg = cfg_of(name, **{"output.dir": str(tmp_path)})
    first = [p.read_bytes() for p in write_outputs(run_certify(cfg), tmp_path)]
    second = [p.read_bytes() for p in write_outputs(run_certify(cfg), tmp_path)]
    assert first == second
    other = [p.read_bytes() for p in write_outputs(run_certify(with_overrides(cfg, {"seed": cfg.seed + 1})), tmp_path)]
    assert other[0] != first[0]


def test_zero_budget_accuracy_is_correct_fraction():
    cfg = cfg_of("gaussian_grid", **{"threat.epsilons": [0.0]})
    run = run_certify(cfg)
    d_out = run.results[0].certs.__len__()
    expected = np.mean([len(r.correct) / d_out for r in run.results])
    for column in ("naive_certified_accuracy", "relaxed_certified_accuracy", "exact_certified_accuracy"):
        assert run.curve[column] == [pytest.approx(expected)]


def test_curves_are_ordered_and_nonincreasing():
    for name in ("gaussian_grid", "bernoulli_oracle", "sparsity_cluster"):
        run = run_certify(cfg_of(name))
        naive, relaxed, exact = (np.array(run.curve[f"{v}_certified_accuracy"]) for v in ("naive", "relaxed", "exact"))
        assert np.all(naive <= relaxed + 1e-12) and np.all(relaxed <= exact + 1e-12)
        for column in (naive, relaxed, exact):
            assert np.all(np.diff(column) <= 1e-12)


def test_report_structure():
    report = run_certify(cfg_of("bernoulli_oracle")).report()
    assert set(report) == {"version", "config", "epsilons", "curve", "acr", "inputs"}
    prediction = report["inputs"][0]["predictions"][0]
    assert len(prediction["status"]) == len(report["epsilons"])
    assert set(prediction["status"]) <= {"abstained", "base-robust", "base-broken"}
    json.dumps(report)


def test_holm_never_worse_than_bonferroni():
    holm = run_certify(cfg_of("gaussian_grid", **{"monte_carlo.correction": "holm"}))
    bonf = run_certify(cfg_of("gaussian_grid", **{"monte_carlo.correction": "bonferroni"}))
    for h, b in zip(holm.results, bonf.results):
        for ch, cb in zip(h.certs, b.certs):
            if cb is not None:
                assert ch is not None and ch.eta >= cb.eta


def test_sampling_is_reproducible_per_stream():
    cfg = cfg_of("gaussian_grid")
    setup = build_setup(cfg)
    a, b = draw_samples(cfg, setup), draw_samples(cfg, setup)
    assert a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
    fewer = draw_samples(with_overrides(cfg, {"data.n_inputs": 1}), build_setup(with_overrides(cfg, {"data.n_inputs": 1})))
    # Input 0 draws from the same streams whether or not other inputs exist.
    assert all(np.array_equal(fewer[k], a[k]) for k in fewer)


def test_reuse_flag_skips_second_batch():
    cfg = cfg_of("bernoulli_oracle", **{"monte_carlo.reuse_samples": True})
    cache = draw_samples(cfg, build_setup(cfg))
    assert all(phase == 0 for (_, _, phase) in cache)
    assert run_certify(cfg).curve["exact_certified_accuracy"][0] > 0


@pytest.mark.parametrize("name", ["bernoulli_oracle", "sparsity_cluster"])
def test_sampled_radii_do_not_exceed_exact_radii(name):
    cfg = cfg_of(name)
    setup = build_setup(cfg)
    run = run_certify(cfg)
    for a, result in enumerate(run.results):
        stats, exact = exact_certificates(setup.model, setup.scheme, setup.inputs[a].astype(np.int8))
        for sampled, truth, label, exact_label in zip(result.certs, exact, result.labels, stats.labels):
            if sampled is not None:
                assert label == exact_label and truth is not None and sampled.eta <= truth.eta


def test_sampled_bounds_below_exhaustive_truth():
    cfg = cfg_of("bernoulli_oracle")
    setup = build_setup(cfg)
    run = run_certify(cfg)
    for a, result in enumerate(run.results):
        for k, eps in enumerate(run.epsilons):
            truth = exhaustive_attack(setup.model, setup.scheme, setup.inputs[a].astype(np.int8), ThreatModel(0, int(eps), "binary"), result.correct)
            for mode in ("naive", "relaxed", "exact"):
                assert result.bounds[mode][k] <= truth


def test_pareto_examples():
    assert pareto_dominated([(0.5, 0.5)]) == [False]
    assert pareto_dominated([(0.9, 0.6), (0.8, 0.5)]) == [False, True]
    assert pareto_dominated([(0.9, 0.5), (0.8, 0.6)]) == [False, False]
    assert pareto_dominated([(0.7, 0.7), (0.7, 0.7)]) == [False, False]
    assert pareto_dominated([(0.7, 0.7), (0.7, 0.6)]) == [False, True]


def sweep_line_frontier(points):
    """Dominance by sorting on accuracy and tracking the best radius seen so far."""
    order = sorted(range(len(points)), key=lambda i: (-points[i][0], -points[i][1]))
    flags = [False] * len(points)
    best_acr_strict, k = -np.inf, 0
    while k < len(order):
        group = [i for i in order[k:] if points[i][0] == points[order[k]][0]]
        top = max(points[i][1] for i in group)
        for i in group:
            flags[i] = points[i][1] < top or points[i][1] <= best_acr_strict
        best_acr_strict = max(best_acr_strict, top)
        k += len(group)
    return flags


def test_pareto_matches_sort_oracle():
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        points = [tuple(float(v) for v in rng.integers(0, 6, 2) / 5) for _ in range(n)]
        assert pareto_dominated(points) == sweep_line_frontier(points)


def test_expand_grid_order():
    rows = expand_grid({"smoothing": {"sigma_min": [0.1, 0.2], "sigma_max": [1.0]}, "collective": {"n_bins": [2, 4]}})
    assert rows[0] == {"collective.n_bins": 2, "smoothing.sigma_max": 1.0, "smoothing.sigma_min": 0.1}
    assert len(rows) == 4
