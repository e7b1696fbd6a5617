"""Two-stage solver tests against extensive-form and analytic oracles."""

from __future__ import annotations

import numpy as np
import pytest

from shplan.stochastic import (RecourseOracle, ScenarioSet, evaluate,
                               expected_recourse, mean_value_problem,
                               solve_extensive, solve_lshaped, solve_sd,
                               validate_statistical_optimality)

from _toys import make_newsvendor, make_toy_uc, newsvendor_cost


def rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_extensive_newsvendor_matches_analytic():
    prob = make_newsvendor()
    sol, x1 = solve_extensive(prob)
    assert sol.status == "optimal"
    xs = np.linspace(0, 10, 2001)
    best = min(newsvendor_cost(v) for v in xs)
    assert sol.objective == pytest.approx(best, abs=1e-8)
    assert x1[0] == pytest.approx(5.0, abs=1e-8)


def test_lshaped_single_scenario_equals_deterministic():
    rng = np.random.default_rng(2)
    prob = make_toy_uc(rng, n_units=2, n_periods=3, n_scenarios=1)
    res = solve_lshaped(prob, gap_tol=0.0, cut_tol=1e-8)
    ext, _ = solve_extensive(prob)
    assert res.solution.status == "optimal"
    assert rel(res.objective, ext.objective) <= 1e-6


def test_lshaped_toy_uc_vs_extensive():
    rng = np.random.default_rng(11)
    prob = make_toy_uc(rng, n_units=2, n_periods=2, n_scenarios=3)
    res = solve_lshaped(prob, gap_tol=0.0, cut_tol=1e-8)
    ext, _ = solve_extensive(prob)
    assert rel(res.objective, ext.objective) <= 1e-6


def test_lshaped_randomized_instances():
    rng = np.random.default_rng(31)
    for trial in range(6):
        prob = make_toy_uc(rng,
                           n_units=int(rng.integers(1, 4)),
                           n_periods=int(rng.integers(1, 5)),
                           n_scenarios=int(rng.integers(1, 6)))
        res = solve_lshaped(prob, gap_tol=0.0, cut_tol=1e-8)
        ext, _ = solve_extensive(prob)
        assert rel(res.objective, ext.objective) <= 1e-6, f"trial {trial}"


def test_lshaped_cuts_hold_at_optimum():
    rng = np.random.default_rng(17)
    prob = make_toy_uc(rng, n_units=3, n_periods=2, n_scenarios=4)
    res = solve_lshaped(prob, gap_tol=0.0, cut_tol=1e-8)
    qbar, _ = expected_recourse(prob, res.x)
    for cut in res.cuts:
        assert cut.alpha + cut.beta @ res.x <= qbar + 1e-6


def test_vss_nonnegative():
    rng = np.random.default_rng(23)
    for _ in range(4):
        prob = make_toy_uc(rng, n_units=2, n_periods=2,
                           n_scenarios=int(rng.integers(2, 6)))
        sp = solve_lshaped(prob, gap_tol=0.0, cut_tol=1e-8)
        mv = solve_lshaped(mean_value_problem(prob), gap_tol=0.0, cut_tol=1e-8)
        cost_sp = evaluate(prob, sp.x)
        cost_mv = evaluate(prob, mv.x)
        assert cost_sp <= cost_mv + 1e-8


def test_sd_degenerate_sampler_matches_deterministic():
    prob = make_newsvendor()
    prob.sampler = lambda rng, n: np.full((n, 1), 5.0)
    res = solve_sd(prob, np.random.default_rng(3), min_samples=64,
                   max_samples=512)
    f_det = newsvendor_cost(5.0, demands=(5.0,), probs=(1.0,))
    assert rel(res.objective_estimate, f_det) <= 1e-4
    assert res.x[0] == pytest.approx(5.0, abs=1e-6)


def test_sd_three_point_newsvendor_statistically_optimal():
    prob = make_newsvendor()
    res = solve_sd(prob, np.random.default_rng(7), min_samples=256,
                   max_samples=1024)
    assert res.samples >= 256
    assert res.x[0] == pytest.approx(5.0, abs=1e-6)
    true_opt = newsvendor_cost(5.0)
    report = validate_statistical_optimality(prob, res.x, n_eval=2000,
                                             saa_reps=8, saa_batch=64,
                                             rng=np.random.default_rng(40))
    assert report.ci[0] <= true_opt <= report.ci[1]
    assert report.passed


def test_sd_min_samples_honored():
    prob = make_newsvendor()
    res = solve_sd(prob, np.random.default_rng(5), max_samples=512)
    assert res.samples >= 256


def test_sd_cut_rescaling_stays_valid():
    prob = make_newsvendor()
    res = solve_sd(prob, np.random.default_rng(13), min_samples=64,
                   max_samples=128)
    k = res.samples
    oracle = RecourseOracle(prob.recourse)
    saa = np.mean([oracle.solve(res.x, xi)[0] for xi in res.sample_points])
    for cut in res.state.cuts:
        value = (cut["ssum"] + cut["wsum"] @ res.x) / k
        assert value <= saa + 1e-6


def test_sd_incumbent_estimates_stabilize():
    prob = make_newsvendor()
    res = solve_sd(prob, np.random.default_rng(19), min_samples=256,
                   max_samples=1024)
    v = np.array([r["incumbent_estimate"] for r in res.log])
    running = np.cumsum(v) / np.arange(1, v.size + 1)
    tail = running[-max(1, v.size // 4):]
    assert tail.max() - tail.min() <= 0.01 * (1.0 + abs(v[-1]))


def test_validation_rejects_perturbed_candidate():
    prob = make_newsvendor()
    report = validate_statistical_optimality(prob, np.array([6.5]),
                                             n_eval=1000,
                                             rng=np.random.default_rng(21))
    assert not report.passed
    true_gap = newsvendor_cost(6.5) - newsvendor_cost(5.0)
    assert report.gap_mean == pytest.approx(true_gap, rel=0.5)


def test_validation_zero_variance_is_exact():
    prob = make_newsvendor()
    prob.sampler = lambda rng, n: np.full((n, 1), 5.0)
    good = validate_statistical_optimality(prob, np.array([5.0]), n_eval=50,
                                           saa_reps=4, saa_batch=8,
                                           rng=np.random.default_rng(1))
    assert good.passed
    assert good.objective_se == 0.0
    assert abs(good.gap_mean) <= 1e-9
    bad = validate_statistical_optimality(prob, np.array([6.0]), n_eval=50,
                                          saa_reps=4, saa_batch=8,
                                          rng=np.random.default_rng(1))
    assert not bad.passed
    assert bad.gap_se == pytest.approx(0.0, abs=1e-12)
    f5 = newsvendor_cost(5.0, demands=(5.0,), probs=(1.0,))
    f6 = newsvendor_cost(6.0, demands=(5.0,), probs=(1.0,))
    assert bad.gap_mean == pytest.approx(f6 - f5, abs=1e-9)
