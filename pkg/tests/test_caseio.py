"""Manifest-driven case and series loading."""

import json

import numpy as np
import pytest

from shplan.caseio import load_case, load_series, series_dir, series_report
from shplan.errors import InputError
from shplan.timeseries import TimeSeriesFrame, write_frame

T0 = np.datetime64("2024-06-01T00:00")

BUSES = """id,theta_min,theta_max,demand_ref
b1,-0.6,0.6,load1
b2,,,
"""
LINES = """from_bus,to_bus,susceptance,flow_max,flow_min
b1,b2,12.5,90,
"""
GENS = """id,bus,kind,g_min,g_max,ramp_up,ramp_down,min_up,min_down,\
cost_startup,cost_noload,cost_variable,heat_rate,co2_rate,nox_rate,so2_rate,\
supply_ref
g1,b1,conventional_DA,10,60,25,25,2,2,150,8,32,9.5,0.6,1.1,2.0,
w1,b2,wind,0,45,0,0,1,1,0,0,0,0,0,0,0,wind1
"""


def write_case(tmp_path, manifest_extra=None, buses=BUSES, lines=LINES,
               gens=GENS):
    (tmp_path / "buses.csv").write_text(buses)
    (tmp_path / "lines.csv").write_text(lines)
    (tmp_path / "generators.csv").write_text(gens)
    man = {"buses": "buses.csv", "lines": "lines.csv",
           "generators": "generators.csv", "reserve": "low",
           "series_dir": "series"}
    man.update(manifest_extra or {})
    path = tmp_path / "case.json"
    path.write_text(json.dumps(man))
    return path


def write_series(tmp_path, rows=8, resolution=15):
    d = tmp_path / "series"
    d.mkdir(exist_ok=True)
    rng = np.random.default_rng(0)
    for signal, cols in (("demand", ("load1",)), ("wind", ("wind1",))):
        for kind in ("forecast", "actual"):
            vals = rng.uniform(5, 20, size=(rows, len(cols)))
            fr = TimeSeriesFrame(T0, resolution, cols, vals, kind)
            write_frame(fr, d / f"{signal}_{kind}.csv")
    return d


def test_load_case_round_trip(tmp_path):
    case = load_case(write_case(tmp_path))
    assert [b.id for b in case.buses] == ["b1", "b2"]
    assert case.bus("b1").demand_ref == "load1"
    assert case.bus("b2").demand_ref is None
    assert case.lines[0].flow_min == -90.0
    assert case.lines[0].susceptance == 12.5
    g1 = case.generators[0]
    assert g1.kind == "conventional_DA" and g1.min_up == 2
    assert g1.cost_variable == 32.0 and g1.heat_rate == 9.5
    assert case.generators[1].supply_ref == "wind1"
    assert case.reserve.uc_fraction == 0.10
    assert case.timescales.da.n_periods == 24


def test_manifest_overrides(tmp_path):
    man = write_case(tmp_path, manifest_extra={
        "penalties": {"phi_unmet": 900.0},
        "reserve": {"uc_fraction": 0.2, "ed_fraction": 0.05},
        "timescales": {"st": [240, 15, 60]},
        "sw_multiplier": 2.5})
    case = load_case(man)
    assert case.penalties.phi_unmet == 900.0
    assert case.penalties.phi_over == 25.0
    assert case.reserve.uc_fraction == 0.2
    assert case.timescales.st.solve_frequency == 60
    assert case.timescales.da.horizon == 1440
    assert case.sw_multiplier == 2.5
    assert series_dir(man).endswith("series")


def test_load_case_errors(tmp_path):
    with pytest.raises(InputError, match="missing case manifest"):
        load_case(tmp_path / "nope.json")

    man = write_case(tmp_path)
    (tmp_path / "lines.csv").unlink()
    with pytest.raises(InputError, match="lines.csv"):
        load_case(man)

    write_case(tmp_path, buses="id,theta_mn\nb1,0\n")
    with pytest.raises(InputError, match="unknown columns"):
        load_case(man)

    write_case(tmp_path, gens="id,bus\ng1,b1\n")
    with pytest.raises(InputError, match="missing columns"):
        load_case(man)

    write_case(tmp_path, gens=GENS.replace("g1,b1", "g1,zz"))
    with pytest.raises(InputError, match="invalid case"):
        load_case(man)
    case = load_case(man, validate=False)
    assert case.generators[0].bus == "zz"


def test_series_loading_and_scaling(tmp_path):
    write_case(tmp_path)
    d = write_series(tmp_path)
    plain = load_series(d)
    scaled = load_series(d, sw_multiplier=3.0)
    np.testing.assert_allclose(scaled.wind_forecast.values,
                               3.0 * plain.wind_forecast.values)
    np.testing.assert_allclose(scaled.wind_actual.values,
                               3.0 * plain.wind_actual.values)
    np.testing.assert_array_equal(scaled.demand_forecast.values,
                                  plain.demand_forecast.values)
    assert plain.solar_forecast is None
    merged = plain.supply("forecast")
    assert merged.columns == ("wind1",)


def test_missing_required_series(tmp_path):
    write_case(tmp_path)
    d = write_series(tmp_path)
    (d / "demand_actual.csv").unlink()
    with pytest.raises(InputError, match="demand_actual.csv"):
        load_series(d)


def test_series_report_consistency(tmp_path):
    case = load_case(write_case(tmp_path))
    bundle = load_series(write_series(tmp_path, rows=96))
    rep = series_report(case, bundle, n_days=1)
    assert rep.ok, str(rep)

    short = load_series(write_series(tmp_path, rows=8))
    rep = series_report(case, short, n_days=1)
    assert any("too short" in f for f in rep.failures)

    case_bad = load_case(write_case(
        tmp_path, gens=GENS.replace("wind1", "wind9")), validate=True)
    bundle = load_series(write_series(tmp_path, rows=96))
    rep = series_report(case_bad, bundle)
    assert any("wind9" in f for f in rep.failures)
