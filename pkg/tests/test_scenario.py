"""VAR fitting, path sampling, and forecast-update arithmetic."""

import numpy as np
import pytest

from shplan.errors import InputError, ModelError
from shplan.scenario import (
    ScenarioPaths,
    UpdateSchedule,
    VarModel,
    fit_var,
    simulate_paths,
    update_forecast,
)
from shplan.timeseries import TimeSeriesFrame

T0 = np.datetime64("2024-03-01T00:00")


def make_frame(values, resolution=15, kind="forecast", columns=None):
    vals = np.asarray(values, dtype=float)
    cols = columns or tuple(f"site{i}" for i in range(vals.shape[1]))
    return TimeSeriesFrame(T0, resolution, cols, vals, kind)


def simulate_known_var(phis, mean, noise_sd, steps, rng):
    """Oracle data generator: level series around a fixed mean."""
    n = phis[0].shape[0]
    y = np.full(n, float(mean))
    out = np.empty((steps, n))
    dev_hist = [np.zeros(n) for _ in phis]
    for t in range(steps):
        dev = rng.normal(0.0, noise_sd, n)
        for j, phi in enumerate(phis):
            dev = dev + phi @ dev_hist[j]
        dev_hist = [dev] + dev_hist[:-1]
        out[t] = mean + dev
    return np.clip(out, 0.0, None)


def test_var1_coefficients_recovered():
    rng = np.random.default_rng(11)
    phi = 0.5 * np.eye(2)
    data = simulate_known_var([phi], mean=5.0, noise_sd=0.01, steps=2000,
                              rng=rng)
    model = fit_var(make_frame(data), max_lag=3)
    assert model.order in (1, 2, 3)
    got = model.coefficients[0]
    assert abs(got[0, 0] - 0.5) < 0.05 and abs(got[1, 1] - 0.5) < 0.05
    assert abs(got[0, 1]) < 0.05 and abs(got[1, 0]) < 0.05


def test_lag_two_dynamics_selected():
    rng = np.random.default_rng(12)
    phis = [0.2 * np.eye(2), 0.6 * np.eye(2)]
    data = simulate_known_var(phis, mean=8.0, noise_sd=0.05, steps=3000,
                              rng=rng)
    model = fit_var(make_frame(data), max_lag=3)
    assert model.order == 2
    assert abs(model.coefficients[1][0, 0] - 0.6) < 0.07


def test_constant_history_degenerates_cleanly():
    data = np.full((200, 2), 42.0)
    model = fit_var(make_frame(data), max_lag=3)
    assert model.ridge
    assert np.abs(model.noise_cov).max() < 1e-10
    base = make_frame(np.full((16, 2), 42.0))
    paths = simulate_paths(model, base, n_scenarios=5, seed=1)
    np.testing.assert_allclose(paths.paths, 42.0, atol=1e-6)


def test_history_length_precondition():
    with pytest.raises(InputError, match="too short"):
        fit_var(make_frame(np.ones((30, 2))), max_lag=3)


def test_zero_noise_paths_equal_base():
    model = VarModel(order=1, coefficients=(0.3 * np.eye(2),),
                     noise_mean=np.zeros(2), noise_cov=np.zeros((2, 2)),
                     normalization=np.array([100.0, 50.0]),
                     columns=("site0", "site1"), resolution=15)
    base = make_frame(np.linspace(10, 60, 24).repeat(2).reshape(24, 2))
    paths = simulate_paths(model, base, n_scenarios=7, seed=3)
    assert len(paths) == 7
    np.testing.assert_array_equal(paths.paths,
                                  np.repeat(base.values[None], 7, axis=0))
    np.testing.assert_allclose(paths.probabilities, 1.0 / 7)


def test_sample_mean_matches_base_at_3_sigma():
    model = VarModel(order=1, coefficients=(0.4 * np.eye(2),),
                     noise_mean=np.zeros(2),
                     noise_cov=0.0004 * np.eye(2),
                     normalization=np.array([80.0, 40.0]),
                     columns=("site0", "site1"), resolution=15)
    base = make_frame(np.full((20, 2), 50.0))
    paths = simulate_paths(model, base, n_scenarios=10000, seed=9)
    mean = paths.paths.mean(axis=0)
    se = paths.paths.std(axis=0, ddof=1) / np.sqrt(len(paths))
    assert (np.abs(mean - base.values) <= 3.0 * se + 1e-12).all()


def test_seed_reproducibility_and_nonnegativity():
    rng = np.random.default_rng(13)
    data = simulate_known_var([0.5 * np.eye(2)], mean=1.0, noise_sd=0.4,
                              steps=400, rng=rng)
    model = fit_var(make_frame(data), max_lag=2)
    base = make_frame(np.full((16, 2), 0.5))
    a = simulate_paths(model, base, n_scenarios=50, seed=77)
    b = simulate_paths(model, base, n_scenarios=50, seed=77)
    np.testing.assert_array_equal(a.paths, b.paths)
    assert (a.paths >= 0).all()
    c = simulate_paths(model, base, n_scenarios=50, seed=78)
    assert not np.array_equal(a.paths, c.paths)


def test_mismatched_base_rejected():
    model = VarModel(order=1, coefficients=(np.eye(2),),
                     noise_mean=np.zeros(2), noise_cov=np.eye(2),
                     normalization=np.ones(2), columns=("a", "b"),
                     resolution=15)
    with pytest.raises(InputError, match="columns"):
        simulate_paths(model, make_frame(np.ones((4, 2))), 3, 0)
    bad_res = TimeSeriesFrame(T0, 60, ("a", "b"), np.ones((4, 2)), "forecast")
    with pytest.raises(InputError, match="60 min"):
        simulate_paths(model, bad_res, 3, 0)


def test_indefinite_covariance_rejected():
    cov = np.array([[1.0, 0.0], [0.0, -0.5]])
    with pytest.raises(InputError, match="semidefinite"):
        VarModel(order=1, coefficients=(np.eye(2),), noise_mean=np.zeros(2),
                 noise_cov=cov, normalization=np.ones(2), columns=("a", "b"),
                 resolution=15)


def test_model_json_round_trip():
    rng = np.random.default_rng(15)
    data = simulate_known_var([0.3 * np.eye(2)], mean=4.0, noise_sd=0.1,
                              steps=300, rng=rng)
    model = fit_var(make_frame(data), max_lag=2)
    clone = VarModel.from_json(model.to_json())
    assert clone.order == model.order
    np.testing.assert_allclose(clone.coefficients[0], model.coefficients[0])
    np.testing.assert_allclose(clone.noise_cov, model.noise_cov)
    np.testing.assert_allclose(clone.normalization, model.normalization)
    assert clone.columns == model.columns


def test_update_schedule_validation():
    s = UpdateSchedule.default(20)
    assert len(s) == 20
    assert s.alpha(1) == pytest.approx(15.0 / 16.0)
    assert s.alpha(16) == 0.0 and s.alpha(25) == 0.0
    assert all(s.alphas[i] >= s.alphas[i + 1] for i in range(19))
    with pytest.raises(InputError, match="nonincreasing"):
        UpdateSchedule((0.2, 0.5))
    with pytest.raises(InputError, match="\\[0, 1\\]"):
        UpdateSchedule((1.2, 0.1))


def test_update_zero_alpha_is_identity():
    fc = make_frame(np.array([[90.0], [100.0], [70.0]]), columns=("w",))
    out = update_forecast(fc, np.array([80.0]), UpdateSchedule((0.0, 0.0)), 2)
    np.testing.assert_array_equal(out.values, fc.values)


def test_update_direct_substitution():
    fc = make_frame(np.array([[90.0], [100.0]]), columns=("w",))
    out = update_forecast(fc, np.array([80.0]), UpdateSchedule((1.0,)), 1)
    assert out.values[1, 0] == pytest.approx(90.0)
    assert out.values[0, 0] == 90.0


def test_update_actual_equals_forecast_is_exact_identity():
    rng = np.random.default_rng(21)
    vals = rng.uniform(0.0, 300.0, size=(18, 3))
    fc = make_frame(vals, columns=("a", "b", "c"))
    out = update_forecast(fc, vals[0].copy(), UpdateSchedule.default(17), 17)
    np.testing.assert_array_equal(out.values, fc.values)


def test_update_affine_before_clipping():
    sched = UpdateSchedule((0.8, 0.4, 0.1))
    f1 = make_frame(np.array([[50.0], [60.0], [40.0], [55.0]]), columns=("w",))
    f2 = make_frame(np.array([[10.0], [5.0], [20.0], [15.0]]), columns=("w",))
    y1, y2 = np.array([58.0]), np.array([12.0])
    combined = make_frame(f1.values + f2.values, columns=("w",))
    lhs = update_forecast(combined, y1 + y2, sched, 3).values
    rhs = update_forecast(f1, y1, sched, 3).values + \
        update_forecast(f2, y2, sched, 3).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_update_clips_at_zero():
    fc = make_frame(np.array([[100.0], [2.0], [1.0]]), columns=("w",))
    out = update_forecast(fc, np.array([0.0]), UpdateSchedule((1.0, 1.0)), 2)
    assert (out.values >= 0).all()
    assert out.values[1, 0] == 0.0


def test_update_precondition_errors():
    fc = make_frame(np.array([[1.0], [2.0]]), columns=("w",))
    with pytest.raises(InputError, match="lookahead"):
        update_forecast(fc, np.array([1.0]), UpdateSchedule((0.5,)), 2)
    with pytest.raises(InputError, match="schedule"):
        update_forecast(fc, np.array([1.0]), UpdateSchedule(()), 1)
    with pytest.raises(InputError, match="sites"):
        update_forecast(fc, np.array([1.0, 2.0]), UpdateSchedule((0.5,)), 1)


def test_scenario_paths_validation():
    with pytest.raises(InputError, match="distribution"):
        ScenarioPaths(np.ones((2, 3, 1)), np.array([0.9, 0.9]), ("a",),
                      T0, 15)
    with pytest.raises(InputError, match="nonnegative"):
        ScenarioPaths(-np.ones((2, 3, 1)), np.array([0.5, 0.5]), ("a",),
                      T0, 15)
    sp = ScenarioPaths(np.ones((2, 3, 1)), np.array([0.5, 0.5]), ("a",),
                       T0, 15)
    pf = sp.path_frame(1)
    assert pf.n_rows == 3 and pf.columns == ("a",)
