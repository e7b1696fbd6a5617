"""Frame construction, resampling, slicing, CSV round trips."""

import numpy as np
import pytest

from shplan.errors import InputError
from shplan.timeseries import (
    TimeSeriesFrame,
    read_frame,
    resample,
    slice_horizon,
    write_frame,
)

T0 = np.datetime64("2024-01-15T00:00")

# monotone-cubic upsample of the 60-min ramp {0, 60} onto a 15-min grid,
# frozen before the implementation existed
RAMP_GOLDEN = np.array([0.0, 15.0, 30.0, 45.0, 60.0])


def frame(values, resolution=60, columns=None, kind="forecast"):
    vals = np.atleast_2d(np.asarray(values, dtype=float))
    if vals.shape[0] == 1 and np.asarray(values).ndim == 1:
        vals = vals.T
    cols = columns or tuple(f"s{i}" for i in range(vals.shape[1]))
    return TimeSeriesFrame(T0, resolution, cols, vals, kind)


def test_constant_series_upsamples_to_constant():
    out = resample(frame([50.0, 50.0, 50.0]), 15)
    assert out.resolution == 15
    assert out.n_rows == 9
    np.testing.assert_allclose(out.values, 50.0)


def test_downsample_is_bin_average():
    out = resample(frame([0.0, 100.0, 0.0, 100.0], resolution=15), 60)
    np.testing.assert_allclose(out.values.ravel(), [50.0])
    assert out.resolution == 60
    assert out.start == T0


def test_ramp_upsample_matches_golden_vector():
    out = resample(frame([0.0, 60.0]), 15)
    np.testing.assert_allclose(out.values.ravel(), RAMP_GOLDEN, atol=1e-12)
    v = out.values.ravel()
    assert (np.diff(v) > 0).all()
    assert v[0] == 0.0 and v[-1] == 60.0


def test_upsample_never_undershoots_zero():
    out = resample(frame([0.0, 0.0, 100.0, 0.0, 0.0]), 5)
    assert (out.values >= 0).all()
    # knots are reproduced exactly
    np.testing.assert_allclose(out.values[::12, 0],
                               [0.0, 0.0, 100.0, 0.0, 0.0], atol=1e-12)


def test_round_trip_reproduces_bin_averages():
    rng = np.random.default_rng(3)
    f = frame(rng.uniform(0.0, 90.0, size=(13, 3)).tolist(), resolution=60,
              columns=("a", "b", "c"))
    fine = resample(f, 15)
    back = resample(fine, 60)
    k = 4
    nfull = fine.n_rows // k
    expect = fine.values[:nfull * k].reshape(nfull, k, 3).mean(axis=1)
    expect = np.vstack([expect, fine.values[-1:]])
    np.testing.assert_allclose(back.values, expect, atol=1e-9)
    assert back.n_rows == f.n_rows
    # knot subsampling recovers the original exactly
    np.testing.assert_allclose(fine.values[::k], f.values, atol=1e-12)


def test_nonnegativity_preserved_both_directions():
    rng = np.random.default_rng(4)
    f = frame(np.abs(rng.normal(20, 30, size=(9, 2))).tolist(),
              resolution=30, columns=("x", "y"))
    assert (resample(f, 15).values >= 0).all()
    assert (resample(f, 90).values >= 0).all()


def test_non_commensurate_rejected():
    with pytest.raises(InputError, match="not.*commensurate"):
        resample(frame([1.0, 2.0], resolution=60), 40)


def test_slice_horizon():
    f = frame(list(range(10)), resolution=15)
    full = slice_horizon(f, 0, 10)
    np.testing.assert_array_equal(full.values, f.values)
    assert full.start == f.start

    empty = slice_horizon(f, 4, 0)
    assert empty.n_rows == 0
    assert empty.columns == f.columns and empty.resolution == 15

    sub = slice_horizon(f, 3, 2)
    np.testing.assert_allclose(sub.values.ravel(), [3.0, 4.0])
    assert sub.start == T0 + np.timedelta64(45, "m")

    with pytest.raises(InputError):
        slice_horizon(f, 8, 3)
    with pytest.raises(InputError):
        slice_horizon(f, -1, 2)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    f = frame(rng.uniform(0, 500, size=(17, 2)).tolist(), resolution=15,
              columns=("wind_a", "wind_b"), kind="actual")
    path = tmp_path / "wind_actual.csv"
    write_frame(f, path)
    g = read_frame(path, "actual")
    assert g.columns == f.columns
    assert g.resolution == 15
    assert g.start == f.start
    assert g.kind == "actual"
    np.testing.assert_array_equal(g.values, f.values)


def test_csv_rejects_missing_and_ragged(tmp_path):
    p = tmp_path / "demand_forecast.csv"
    p.write_text("timestamp,a\n2024-01-15T00:00,1.0\n2024-01-15T01:00,\n")
    with pytest.raises(InputError, match="missing value"):
        read_frame(p, "forecast")
    p.write_text("timestamp,a,b\n2024-01-15T00:00,1.0\n")
    with pytest.raises(InputError, match="row 1"):
        read_frame(p, "forecast")
    p.write_text("timestamp,a\n2024-01-15T00:00,1.0\n2024-01-15T00:30,2.0\n"
                 "2024-01-15T01:30,3.0\n")
    with pytest.raises(InputError, match="uniformly spaced"):
        read_frame(p, "forecast")


def test_frame_validation():
    with pytest.raises(InputError, match="negative value"):
        frame([[1.0], [-0.5]])
    with pytest.raises(InputError, match="missing value"):
        frame([[1.0], [np.nan]])
    with pytest.raises(InputError, match="kind"):
        frame([1.0], kind="guess")
    with pytest.raises(InputError, match="column"):
        TimeSeriesFrame(T0, 60, ("a", "b"), np.ones((3, 1)), "actual")


def test_frame_accessors_and_immutability():
    f = frame([[1.0, 2.0], [3.0, 4.0]], columns=("u", "v"))
    np.testing.assert_allclose(f.col("v"), [2.0, 4.0])
    with pytest.raises(InputError):
        f.col("w")
    sel = f.select(("v",))
    assert sel.columns == ("v",)
    np.testing.assert_allclose(sel.values.ravel(), [2.0, 4.0])
    sc = f.scaled(2.0, columns=("u",))
    np.testing.assert_allclose(sc.values, [[2.0, 2.0], [6.0, 4.0]])
    with pytest.raises((ValueError, RuntimeError)):
        f.values[0, 0] = 9.0
    times = f.times()
    assert times[1] - times[0] == np.timedelta64(60, "m")
