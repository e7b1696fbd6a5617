"""Case validation and reserve rules."""

import pytest

from shplan.errors import InputError
from shplan.grid import (
    RESERVE_LEVELS,
    Bus,
    Generator,
    GridCase,
    Line,
    ReservePolicy,
    TimescaleConfig,
    reserve_requirement,
    validate_case,
)


def two_bus_case(**overrides):
    parts = dict(
        buses=(Bus("b1", demand_ref="load1"), Bus("b2")),
        lines=(Line("b1", "b2", susceptance=10.0, flow_max=100.0),),
        generators=(
            Generator("g1", "b1", "conventional_DA", g_min=10.0, g_max=50.0,
                      ramp_up=20.0, ramp_down=20.0, min_up=2, min_down=2,
                      cost_startup=100.0, cost_noload=5.0, cost_variable=30.0),
            Generator("w1", "b2", "wind", g_max=40.0, supply_ref="wind1"),
        ),
    )
    parts.update(overrides)
    return GridCase(**parts)


def test_minimal_case_validates():
    rep = validate_case(two_bus_case())
    assert rep.ok, str(rep)
    assert str(rep) == "ok"


def test_dangling_generator_bus():
    case = two_bus_case(generators=(
        Generator("g1", "nowhere", "conventional_DA", g_max=50.0),))
    rep = validate_case(case)
    assert not rep.ok
    assert any("dangling bus reference" in f for f in rep.failures)


def test_dangling_line_bus():
    case = two_bus_case(lines=(
        Line("b1", "ghost", susceptance=10.0, flow_max=100.0),))
    rep = validate_case(case)
    assert any("dangling bus reference" in f for f in rep.failures)


def test_inverted_angle_bounds_name_the_bus():
    case = two_bus_case(buses=(
        Bus("b1", theta_min=0.6, theta_max=-0.6), Bus("b2")))
    rep = validate_case(case)
    assert any("theta_min > theta_max" in f and "b1" in f
               for f in rep.failures)


def test_disconnected_network_reported():
    case = two_bus_case(lines=())
    rep = validate_case(case)
    assert any("not connected" in f and "b2" in f for f in rep.failures)


def test_renewable_constraints():
    bad_min = two_bus_case(generators=(
        Generator("g1", "b1", "conventional_DA", g_max=50.0),
        Generator("w1", "b2", "wind", g_min=5.0, g_max=40.0,
                  supply_ref="wind1"),
    ))
    assert any("g_min = 0" in f for f in validate_case(bad_min).failures)

    no_ref = two_bus_case(generators=(
        Generator("g1", "b1", "conventional_DA", g_max=50.0),
        Generator("s1", "b2", "solar", g_max=40.0),
    ))
    assert any("supply_ref" in f for f in validate_case(no_ref).failures)


def test_case_requires_day_ahead_unit():
    case = two_bus_case(generators=(
        Generator("f1", "b1", "conventional_ST", g_max=50.0),))
    rep = validate_case(case)
    assert any("conventional_DA" in f for f in rep.failures)


def test_duplicate_ids_flagged():
    case = two_bus_case(generators=(
        Generator("g1", "b1", "conventional_DA", g_max=50.0),
        Generator("g1", "b2", "conventional_ST", g_max=20.0),
    ))
    assert any("duplicate generator" in f for f in validate_case(case).failures)


def test_timescale_defaults_match_layer_table():
    ts = TimescaleConfig()
    assert (ts.da.horizon, ts.da.resolution, ts.da.solve_frequency) == (1440, 60, 1440)
    assert (ts.st.horizon, ts.st.resolution, ts.st.solve_frequency) == (240, 15, 180)
    assert (ts.rt.horizon, ts.rt.resolution, ts.rt.solve_frequency) == (75, 15, 15)
    assert ts.da.n_periods == 24
    assert ts.st.n_periods == 16
    assert ts.rt.n_periods == 5


def test_reserve_requirement_examples():
    pol = ReservePolicy.named("very_low")
    assert reserve_requirement(pol, "DA", 100.0) == pytest.approx(5.0)
    assert reserve_requirement(pol, "RT", 100.0) == pytest.approx(1.25)
    assert reserve_requirement(pol, "ST", 0.0) == 0.0


def test_reserve_requirement_linear_and_monotone():
    levels = ["very_low", "low", "med", "high"]
    for layer in ("DA", "ST", "RT"):
        prev = -1.0
        for level in levels:
            pol = ReservePolicy.named(level)
            r1 = reserve_requirement(pol, layer, 70.0)
            r2 = reserve_requirement(pol, layer, 140.0)
            assert r2 == pytest.approx(2.0 * r1)
            assert r1 > prev
            prev = r1


def test_reserve_requirement_rejects_bad_input():
    pol = ReservePolicy.named("low")
    with pytest.raises(InputError):
        reserve_requirement(pol, "DA", -1.0)
    with pytest.raises(InputError):
        reserve_requirement(pol, "XX", 10.0)
    with pytest.raises(InputError):
        ReservePolicy.named("extreme")


def test_named_levels_cover_paper_table():
    assert RESERVE_LEVELS["very_low"] == (0.05, 0.0125)
    assert RESERVE_LEVELS["low"] == (0.10, 0.025)
    assert RESERVE_LEVELS["med"] == (0.15, 0.05)
    assert RESERVE_LEVELS["high"] == (0.20, 0.10)


def test_line_defaults_and_lookup():
    ln = Line("b1", "b2", susceptance=5.0, flow_max=80.0)
    assert ln.flow_min == -80.0
    assert ln.id == "b1->b2"
    case = two_bus_case()
    assert case.bus("b2").id == "b2"
    assert [g.id for g in case.generators_at("b1")] == ["g1"]
    with pytest.raises(InputError):
        case.bus("zz")
