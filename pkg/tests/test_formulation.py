"""Builder tests against independent oracles.

The central check is a brute-force oracle: enumerate every commitment
pattern of a small two-unit instance, filter by minimum up/down windows,
price the dispatch of each pattern with scipy's HiGHS LP solver, and
compare the best total against the built MIP's optimum.  Around it sit
hand-computed single-instance checks for tubes, ramps, boundary folding,
reserve inflation, renewable pinning, and the stochastic forms.
"""

import io
import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from shplan.errors import InputError, ModelError
from shplan.formulation import (UnitBoundary, build_da_uc, build_ha_ed,
                                build_st_uc, default_boundaries,
                                dispatch_table, dump_model, first_stage_table,
                                recourse_dispatch, verify_solution)
from shplan.grid import (Bus, Generator, GridCase, LayerTimescale,
                         Line, PenaltyConfig, ReservePolicy, TimescaleConfig,
                         validate_case)
from shplan.lp import solve_lp
from shplan.mip import solve_mip
from shplan.stochastic import solve_extensive, solve_lshaped


def one_bus_case(gens, *, da=(240, 60, 1440), st=(60, 15, 180),
                 rt=(75, 15, 15), reserve=(0.0, 0.0),
                 buses=None, lines=()):
    ts = TimescaleConfig(da=LayerTimescale(*da), st=LayerTimescale(*st),
                         rt=LayerTimescale(*rt))
    return GridCase(buses=buses or (Bus("b1"),), lines=lines,
                    generators=tuple(gens),
                    reserve=ReservePolicy(*reserve), timescales=ts)


def conv(gid, **kw):
    base = dict(bus="b1", kind="conventional_DA", g_min=0.0, g_max=100.0,
                ramp_up=100.0, ramp_down=100.0)
    base.update(kw)
    return Generator(id=gid, **base)


def solved_table(built):
    if built.form == "mip":
        sol = solve_mip(built.mip, gap_tol=0.0)
    else:
        sol = solve_lp(built.lp)
    assert sol.status == "optimal"
    return sol, dispatch_table(built, sol.x)


def test_single_unit_flat_demand():
    case = one_bus_case([conv("g1", g_min=10.0, cost_variable=20.0)])
    demand = np.full((4, 1), 50.0)
    built = build_da_uc(case, demand, np.zeros((4, 0)))
    sol, tab = solved_table(built)
    assert sol.objective == pytest.approx(4 * 50 * 20.0, rel=1e-9)
    assert tab.on["g1"].tolist() == [1, 1, 1, 1]
    assert tab.start["g1"].tolist() == [1, 0, 0, 0]
    np.testing.assert_allclose(tab.gen["g1"], 50.0, atol=1e-9)
    np.testing.assert_allclose(tab.shed["b1"], 0.0, atol=1e-9)


def test_zero_demand_positive_noload_stays_dark():
    case = one_bus_case([conv("g1", cost_noload=7.0, cost_startup=3.0,
                              cost_variable=20.0)])
    built = build_da_uc(case, np.zeros((4, 1)), np.zeros((4, 0)))
    sol, tab = solved_table(built)
    assert sol.objective == pytest.approx(0.0, abs=1e-9)
    assert tab.on["g1"].tolist() == [0, 0, 0, 0]
    np.testing.assert_allclose(tab.gen["g1"], 0.0, atol=1e-9)


# --------------------------------------------- enumeration + HiGHS oracle

def _pattern_ok(x, g):
    """Minimum up/down windows for a pattern starting from a cold unit."""
    ext = np.concatenate([[0], x])
    s = np.maximum(0, np.diff(ext))
    z = np.maximum(0, -np.diff(ext))
    T = len(x)
    for t in range(T):
        if s[max(0, t - g.min_up + 1):t + 1].sum() > x[t]:
            return None
        if z[max(0, t - g.min_down + 1):t + 1].sum() > 1 - x[t]:
            return None
    return s, z


def _dispatch_cost(gens, xs, need, case, hours):
    """Price one commitment pattern with scipy's LP solver.

    Variables: per unit per period consumed and excess MW, then one shed
    column per period.  Total generation (consumed + excess) obeys the
    capacity and ramp rows; the balance sums consumed generation only.
    """
    G, T = len(gens), len(need)
    ncols = 2 * G * T + T
    c = np.zeros(ncols)
    pen = case.penalties
    for gi, g in enumerate(gens):
        for t in range(T):
            c[2 * (gi * T + t)] = g.cost_variable * hours
            c[2 * (gi * T + t) + 1] = pen.phi_over * hours
    c[2 * G * T:] = pen.phi_unmet * hours

    aub, bub = [], []
    for gi, g in enumerate(gens):
        for t in range(T):
            p, e = 2 * (gi * T + t), 2 * (gi * T + t) + 1
            hi = np.zeros(ncols)
            hi[[p, e]] = 1.0
            aub.append(hi)
            bub.append(g.g_max * xs[gi, t])
            aub.append(-hi)
            bub.append(-g.g_min * xs[gi, t])
            ramp = np.zeros(ncols)
            ramp[[p, e]] = 1.0
            if t > 0:
                ramp[[p - 2, e - 2]] = -1.0
            aub.append(ramp)
            bub.append(g.ramp_up)
            aub.append(-ramp)
            bub.append(g.ramp_down)
    aeq, beq = [], []
    for t in range(T):
        row = np.zeros(ncols)
        for gi in range(G):
            row[2 * (gi * T + t)] = 1.0
        row[2 * G * T + t] = 1.0
        aeq.append(row)
        beq.append(need[t])
    res = linprog(c, A_ub=np.array(aub), b_ub=np.array(bub),
                  A_eq=np.array(aeq), b_eq=np.array(beq), method="highs")
    return res.fun if res.status == 0 else None


def _enumerate_best(case, demand, hours):
    gens = list(case.generators)
    T = demand.shape[0]
    need = demand[:, 0] * (1.0 + case.reserve.uc_fraction)
    best = np.inf
    for bits in itertools.product((0, 1), repeat=T * len(gens)):
        xs = np.array(bits, dtype=np.int64).reshape(len(gens), T)
        commit_cost = 0.0
        ok = True
        for gi, g in enumerate(gens):
            sz = _pattern_ok(xs[gi], g)
            if sz is None:
                ok = False
                break
            s, _ = sz
            commit_cost += g.cost_noload * hours * xs[gi].sum() \
                + g.cost_startup * s.sum()
        if not ok:
            continue
        val = _dispatch_cost(gens, xs, need, case, hours)
        if val is not None:
            best = min(best, commit_cost + val)
    return best


TWO_UNIT = [
    conv("slow", g_min=20.0, g_max=80.0, ramp_up=60.0, ramp_down=60.0,
         min_up=2, min_down=2, cost_startup=500.0, cost_noload=10.0,
         cost_variable=15.0),
    conv("fast", kind="conventional_ST", g_min=5.0, g_max=60.0,
         ramp_up=60.0, ramp_down=60.0, cost_startup=100.0, cost_noload=5.0,
         cost_variable=40.0),
]


def test_da_uc_matches_enumeration_oracle():
    # the fast unit is committed here too: DA-kind twin keeps one layer
    gens = [TWO_UNIT[0],
            Generator(**{**TWO_UNIT[1].__dict__, "kind": "conventional_DA"})]
    case = one_bus_case(gens, reserve=(0.1, 0.0))
    demand = np.array([[30.0], [90.0], [120.0], [40.0]])
    built = build_da_uc(case, demand, np.zeros((4, 0)))
    sol, tab = solved_table(built)
    best = _enumerate_best(case, demand, 1.0)
    assert sol.objective == pytest.approx(best, rel=1e-8)
    worst = verify_solution(built, sol.x)
    assert max(worst.values()) <= 1e-7
    # start/stop events must match the commitment transitions
    for gid in ("slow", "fast"):
        x = np.concatenate([[0], tab.on[gid]])
        np.testing.assert_array_equal(tab.start[gid],
                                      np.maximum(0, np.diff(x)))
        np.testing.assert_array_equal(tab.stop[gid],
                                      np.maximum(0, -np.diff(x)))


def test_renewable_pinned_to_availability_and_curtailed():
    gens = [conv("g1", cost_variable=30.0),
            Generator(id="w1", bus="b2", kind="wind", g_max=100.0,
                      supply_ref="w1")]
    buses = (Bus("b1"), Bus("b2"))
    # susceptance large enough that the angle box does not bind the line
    lines = (Line("b1", "b2", susceptance=100.0, flow_max=100.0),)
    case = one_bus_case(gens, da=(120, 60, 1440), buses=buses, lines=lines)
    demand = np.array([[0.0, 20.0], [0.0, 50.0]])
    avail = np.array([[60.0], [10.0]])
    built = build_da_uc(case, demand, avail)
    sol, tab = solved_table(built)
    np.testing.assert_allclose(tab.total["w1"], avail[:, 0], atol=1e-9)
    np.testing.assert_allclose(tab.gen["w1"], [20.0, 10.0], atol=1e-8)
    np.testing.assert_allclose(tab.exc["w1"], [40.0, 0.0], atol=1e-8)
    np.testing.assert_allclose(tab.flow["b1->b2"], [0.0, 40.0], atol=1e-8)
    # angles obey the dc relation
    np.testing.assert_allclose(
        100.0 * (tab.angle["b1"] - tab.angle["b2"]),
        tab.flow["b1->b2"], atol=1e-8)
    assert sol.objective == pytest.approx(40 * 25.0 + 40 * 30.0, rel=1e-9)


def test_shed_covers_capacity_shortfall():
    case = one_bus_case([conv("g1", g_max=30.0, ramp_up=30.0,
                              cost_variable=10.0)], da=(60, 60, 1440))
    built = build_da_uc(case, np.array([[100.0]]), np.zeros((1, 0)))
    sol, tab = solved_table(built)
    np.testing.assert_allclose(tab.gen["g1"], [30.0], atol=1e-8)
    np.testing.assert_allclose(tab.shed["b1"], [70.0], atol=1e-8)
    assert sol.objective == pytest.approx(30 * 10.0 + 70 * 5000.0, rel=1e-9)


def test_reserve_inflates_balance():
    case = one_bus_case([conv("g1", g_max=200.0, ramp_up=200.0,
                              cost_variable=10.0)],
                        da=(60, 60, 1440), reserve=(0.1, 0.04))
    built = build_da_uc(case, np.array([[100.0]]), np.zeros((1, 0)))
    _, tab = solved_table(built)
    np.testing.assert_allclose(tab.gen["g1"], [110.0], atol=1e-8)

    ha = build_ha_ed(case, np.full((5, 1), 100.0), np.zeros(0),
                     np.zeros((4, 0)), np.ones((5, 1)),
                     np.full((5, 1), 104.0), [104.0])
    _, tab = solved_table(ha)
    np.testing.assert_allclose(tab.gen["g1"], 104.0, atol=1e-8)


# ----------------------------------------------------------- history folding

def test_min_up_history_forces_on():
    g = conv("g1", min_up=3, cost_noload=7.0, cost_startup=1000.0)
    case = one_bus_case([g])
    built = build_da_uc(case, np.zeros((4, 1)), np.zeros((4, 0)),
                        boundaries={"g1": UnitBoundary(1, 1, 0.0)})
    sol, tab = solved_table(built)
    assert tab.on["g1"].tolist() == [1, 1, 0, 0]
    assert sol.objective == pytest.approx(2 * 7.0, rel=1e-9)


def test_min_down_history_forces_off():
    g = conv("g1", min_down=3, cost_variable=10.0)
    case = one_bus_case([g])
    built = build_da_uc(case, np.full((4, 1), 100.0), np.zeros((4, 0)),
                        boundaries={"g1": UnitBoundary(0, 1, 0.0)})
    sol, tab = solved_table(built)
    assert tab.on["g1"].tolist() == [0, 0, 1, 1]
    np.testing.assert_allclose(tab.shed["b1"], [100, 100, 0, 0], atol=1e-8)
    assert sol.objective == pytest.approx(2 * 100 * 5000.0 + 2 * 100 * 10.0,
                                          rel=1e-9)


def test_boundary_generation_limits_first_ramp():
    g = conv("g1", ramp_up=10.0, ramp_down=10.0, cost_variable=10.0)
    case = one_bus_case([g], da=(120, 60, 1440))
    built = build_da_uc(case, np.full((2, 1), 100.0), np.zeros((2, 0)),
                        boundaries={"g1": UnitBoundary(1, 5, 55.0)})
    _, tab = solved_table(built)
    np.testing.assert_allclose(tab.gen["g1"], [65.0, 75.0], atol=1e-8)
    np.testing.assert_allclose(tab.shed["b1"], [35.0, 25.0], atol=1e-8)


# ------------------------------------------------------------------- ST layer

ST_GENS = [
    conv("D", g_min=10.0, g_max=80.0, ramp_up=20.0, ramp_down=20.0,
         cost_variable=20.0, cost_noload=3.0, cost_startup=200.0),
    conv("S", kind="conventional_ST", g_min=5.0, g_max=60.0, ramp_up=60.0,
         ramp_down=60.0, cost_variable=100.0, cost_noload=5.0,
         cost_startup=100.0),
]


def st_built(demand_col):
    case = one_bus_case(ST_GENS)
    demand = np.array(demand_col, dtype=np.float64)[:, None]
    bnd = default_boundaries([ST_GENS[1]])
    bnd["D"] = UnitBoundary(1, 10, 50.0)
    return build_st_uc(case, demand, np.zeros((4, 0)),
                       da_commitments=np.ones((4, 1)),
                       da_targets=np.full((4, 1), 50.0), boundaries=bnd)


def test_st_idle_when_day_ahead_plan_suffices():
    sol, tab = solved_table(st_built([50, 50, 50, 50]))
    assert tab.on["S"].tolist() == [0, 0, 0, 0]
    np.testing.assert_allclose(tab.total["D"], 50.0, atol=1e-8)
    # only the ST layer's own commitment costs appear in its objective
    assert sol.objective == pytest.approx(4 * 50 * 0.25 * 20.0, rel=1e-9)


def test_st_commits_fast_unit_on_spike():
    sol, tab = solved_table(st_built([50, 50, 110, 50]))
    assert tab.on["S"].tolist() == [0, 0, 1, 0]
    np.testing.assert_allclose(tab.shed["b1"], 0.0, atol=1e-8)
    np.testing.assert_allclose(tab.total["D"], [50, 50, 70, 50], atol=1e-8)
    np.testing.assert_allclose(tab.gen["S"], [0, 0, 40, 0], atol=1e-8)
    want = 220 * 0.25 * 20.0 + 100.0 + 5.0 * 0.25 + 40 * 0.25 * 100.0
    assert sol.objective == pytest.approx(want, rel=1e-9)


def test_st_deviation_band_floors_total_generation():
    sol, tab = solved_table(st_built([50, 50, 10, 50]))
    assert tab.on["S"].tolist() == [0, 0, 0, 0]
    np.testing.assert_allclose(tab.total["D"], [50, 50, 30, 50], atol=1e-8)
    np.testing.assert_allclose(tab.gen["D"], [50, 50, 10, 50], atol=1e-8)
    np.testing.assert_allclose(tab.exc["D"], [0, 0, 20, 0], atol=1e-8)
    want = 160 * 0.25 * 20.0 + 20 * 0.25 * 25.0
    assert sol.objective == pytest.approx(want, rel=1e-9)


def test_st_requires_day_ahead_plan():
    case = one_bus_case(ST_GENS)
    with pytest.raises(InputError, match="day-ahead"):
        build_st_uc(case, np.full((4, 1), 50.0), np.zeros((4, 0)),
                    None, None)


# ------------------------------------------------------------------- HA layer

def ha_case(**kw):
    return one_bus_case([conv("C", g_min=10.0, cost_variable=30.0, **kw)])


def test_ha_tracks_targets_when_actuals_match():
    demand = np.array([50.0, 52, 54, 56, 58])[:, None]
    built = build_ha_ed(ha_case(ramp_up=40.0, ramp_down=40.0),
                        demand, np.zeros(0), np.zeros((4, 0)),
                        np.ones((5, 1)), demand.copy(), [50.0])
    sol, tab = solved_table(built)
    np.testing.assert_allclose(tab.gen["C"], demand[:, 0], atol=1e-9)
    assert sol.objective == pytest.approx(demand.sum() * 0.25 * 30.0,
                                          rel=1e-9)


def test_ha_dip_within_band_needs_no_excess():
    demand = np.array([70.0, 70, 40, 70, 70])[:, None]
    built = build_ha_ed(ha_case(ramp_up=40.0, ramp_down=40.0),
                        demand, np.zeros(0), np.zeros((4, 0)),
                        np.ones((5, 1)), np.full((5, 1), 70.0), [70.0])
    _, tab = solved_table(built)
    np.testing.assert_allclose(tab.gen["C"], demand[:, 0], atol=1e-8)
    np.testing.assert_allclose(tab.exc["C"], 0.0, atol=1e-8)
    np.testing.assert_allclose(tab.shed["b1"], 0.0, atol=1e-8)


def test_ha_dip_beyond_band_forces_excess():
    demand = np.array([70.0, 70, 55, 70, 70])[:, None]
    built = build_ha_ed(ha_case(ramp_up=10.0, ramp_down=10.0),
                        demand, np.zeros(0), np.zeros((4, 0)),
                        np.ones((5, 1)), np.full((5, 1), 70.0), [70.0])
    _, tab = solved_table(built)
    np.testing.assert_allclose(tab.exc["C"], [0, 0, 5, 0, 0], atol=1e-8)
    np.testing.assert_allclose(tab.shed["b1"], 0.0, atol=1e-8)


def test_ha_spike_beyond_band_sheds_exactly_the_gap():
    demand = np.array([70.0, 70, 85, 70, 70])[:, None]
    built = build_ha_ed(ha_case(g_max=80.0, ramp_up=10.0, ramp_down=10.0),
                        demand, np.zeros(0), np.zeros((4, 0)),
                        np.ones((5, 1)), np.full((5, 1), 70.0), [70.0])
    _, tab = solved_table(built)
    np.testing.assert_allclose(tab.shed["b1"], [0, 0, 5, 0, 0], atol=1e-8)
    np.testing.assert_allclose(tab.gen["C"], [70, 70, 80, 70, 70], atol=1e-8)


def test_ha_input_checks():
    case = ha_case()
    demand = np.full((5, 1), 50.0)
    with pytest.raises(InputError, match="upstream"):
        build_ha_ed(case, demand, np.zeros(0), np.zeros((4, 0)),
                    None, None, [50.0])
    with pytest.raises(InputError, match="g_prev"):
        build_ha_ed(case, demand, np.zeros(0), np.zeros((4, 0)),
                    np.ones((5, 1)), np.full((5, 1), 50.0), [50.0, 1.0])
    with pytest.raises(InputError, match="demand"):
        build_ha_ed(case, np.full((3, 1), 50.0), np.zeros(0),
                    np.zeros((4, 0)), np.ones((5, 1)),
                    np.full((5, 1), 50.0), [50.0])


# ------------------------------------------------------------ stochastic forms

def wind_case():
    gens = [TWO_UNIT[0],
            Generator(**{**TWO_UNIT[1].__dict__, "kind": "conventional_DA"}),
            Generator(id="w", bus="b1", kind="wind", g_max=100.0,
                      supply_ref="w")]
    return one_bus_case(gens, reserve=(0.1, 0.0))


def test_one_scenario_stochastic_matches_deterministic():
    case = wind_case()
    demand = np.array([[30.0], [90.0], [120.0], [40.0]])
    avail = np.array([[10.0], [20.0], [30.0], [5.0]])
    det = build_da_uc(case, demand, avail)
    det_sol = solve_mip(det.mip, gap_tol=0.0)
    sto = build_da_uc(case, demand, (avail[None, :, :], [1.0]))
    res = solve_lshaped(sto.problem, gap_tol=0.0, cut_tol=1e-9)
    assert res.solution.status == "optimal"
    assert res.objective == pytest.approx(det_sol.objective, rel=1e-6)
    # same columns overall: commitment first stage plus dispatch recourse
    assert det.mip.lp.n == sto.problem.first_stage.n \
        + sto.problem.recourse.lp.n
    assert sto.xi_dim == 4
    tab = first_stage_table(sto, res.x)
    assert set(tab.on) == {"slow", "fast"}


def test_stochastic_recourse_dispatch_matches_scenario():
    case = wind_case()
    demand = np.array([[30.0], [90.0], [120.0], [40.0]])
    paths = np.stack([np.full((4, 1), 20.0), np.zeros((4, 1))])
    sto = build_da_uc(case, demand, (paths, [0.5, 0.5]))
    res = solve_lshaped(sto.problem, gap_tol=0.0, cut_tol=1e-9)
    tab, _ = recourse_dispatch(sto, res.x, paths[1].ravel())
    np.testing.assert_allclose(tab.total["w"], 0.0, atol=1e-8)
    tab, _ = recourse_dispatch(sto, res.x, paths[0].ravel())
    np.testing.assert_allclose(tab.total["w"], 20.0, atol=1e-8)


def test_ha_stochastic_extensive_equals_lshaped():
    gens = [conv("C", g_min=0.0, cost_variable=30.0, ramp_up=40.0,
                 ramp_down=40.0),
            Generator(id="w", bus="b1", kind="wind", g_max=100.0,
                      supply_ref="w")]
    case = one_bus_case(gens)
    demand = np.full((5, 1), 60.0)
    paths = np.stack([np.full((4, 1), 20.0), np.zeros((4, 1))])
    built = build_ha_ed(case, demand, np.array([20.0]), (paths, [0.5, 0.5]),
                        np.ones((5, 1)), np.full((5, 1), 40.0), [40.0],
                        stochastic=True)
    assert built.form == "two_stage"
    ext_sol, x1 = solve_extensive(built.problem)
    res = solve_lshaped(built.problem, gap_tol=0.0, cut_tol=1e-9)
    assert res.objective == pytest.approx(ext_sol.objective, rel=1e-6)
    fs = first_stage_table(built, res.x)
    assert fs.gen["C"][0] + fs.gen["w"][0] == pytest.approx(60.0, abs=1e-7)
    np.testing.assert_allclose(fs.total["w"], 20.0, atol=1e-8)
    tab, _ = recourse_dispatch(built, res.x, paths[1].ravel())
    np.testing.assert_allclose(tab.gen["C"], 60.0, atol=1e-7)
    np.testing.assert_allclose(tab.total["w"], 0.0, atol=1e-8)


def test_dump_model_lists_rows():
    case = one_bus_case([conv("g1", cost_variable=20.0)])
    built = build_da_uc(case, np.full((4, 1), 50.0), np.zeros((4, 0)))
    buf = io.StringIO()
    dump_model(built, buf)
    text = buf.getvalue()
    for tag in ("cap_hi[g1,1]", "balance[b1,4]", "min_up[g1,2]"):
        assert tag in text


def test_demand_shape_rejected():
    case = one_bus_case([conv("g1")])
    with pytest.raises(InputError, match="demand"):
        build_da_uc(case, np.full((3, 1), 50.0), np.zeros((3, 0)))
    with pytest.raises(InputError, match="availability"):
        build_da_uc(case, np.full((4, 1), 50.0), np.zeros((4, 2)))
