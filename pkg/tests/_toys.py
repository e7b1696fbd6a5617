"""Small two-stage problems with independently computable optima."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from shplan.lp import LpBuilder
from shplan.stochastic import RecourseTemplate, ScenarioSet, TwoStageProblem


def make_newsvendor(order_cost=0.5, under=4.0, over=1.0, cap=10.0,
                    demands=(2.0, 5.0, 8.0), probs=(0.3, 0.5, 0.2)):
    """Order x up front; pay `under` per unit short and `over` per unit long."""
    fs_bld = LpBuilder()
    fs_bld.var("order", lo=0.0, up=cap, obj=order_cost)
    fs, _, _ = fs_bld.build()

    rc_bld = LpBuilder()
    rc_bld.var("short", lo=0.0, obj=under)
    rc_bld.var("long", lo=0.0, obj=over)
    # short >= d - x   and   long >= x - d, via rhs = T x + H d
    rc_bld.row("shortfall", {"short": -1.0}, "<=", 0.0)
    rc_bld.row("surplus", {"long": -1.0}, "<=", 0.0)
    rc, _, _ = rc_bld.build()
    T = sparse.csc_matrix(np.array([[1.0], [-1.0]]))
    H = sparse.csc_matrix(np.array([[-1.0], [1.0]]))

    points = np.asarray(demands, dtype=float)[:, None]
    sc = ScenarioSet(points, np.asarray(probs, dtype=float))
    return TwoStageProblem(fs, RecourseTemplate(rc, T, H), scenarios=sc)


def newsvendor_cost(x, order_cost=0.5, under=4.0, over=1.0,
                    demands=(2.0, 5.0, 8.0), probs=(0.3, 0.5, 0.2)):
    d = np.asarray(demands, float)
    p = np.asarray(probs, float)
    return order_cost * x + float(p @ (under * np.maximum(d - x, 0.0)
                                       + over * np.maximum(x - d, 0.0)))


def make_toy_uc(rng, n_units=2, n_periods=2, n_scenarios=3, shed_cost=50.0):
    """Random commitment toy: binary on/start first stage, dispatch recourse."""
    caps = rng.uniform(5.0, 15.0, n_units)
    commit_cost = rng.uniform(2.0, 6.0, n_units)
    start_cost = rng.uniform(3.0, 10.0, n_units)
    var_cost = rng.uniform(0.5, 3.0, n_units)

    fs_bld = LpBuilder()
    for u in range(n_units):
        for t in range(n_periods):
            fs_bld.var(("on", u, t), lo=0.0, up=1.0, obj=commit_cost[u], integer=True)
            fs_bld.var(("start", u, t), lo=0.0, up=1.0, obj=start_cost[u], integer=True)
    for u in range(n_units):
        for t in range(n_periods):
            prev = {("on", u, t - 1): -1.0} if t > 0 else {}
            fs_bld.row("commit_link",
                       {("on", u, t): 1.0, ("start", u, t): -1.0, **prev}, "<=", 0.0)
    fs, fs_idx, ints = fs_bld.build()

    rc_bld = LpBuilder()
    t_entries, h_entries = [], []
    for u in range(n_units):
        for t in range(n_periods):
            rc_bld.var(("gen", u, t), lo=0.0, obj=var_cost[u])
    for t in range(n_periods):
        rc_bld.var(("shed", t), lo=0.0, obj=shed_cost)
    for u in range(n_units):
        for t in range(n_periods):
            r = rc_bld.num_rows
            rc_bld.row("capacity", {("gen", u, t): 1.0}, "<=", 0.0)
            t_entries.append((r, fs_idx[("on", u, t)], caps[u]))
    for t in range(n_periods):
        r = rc_bld.num_rows
        coeffs = {("gen", u, t): 1.0 for u in range(n_units)}
        coeffs[("shed", t)] = 1.0
        rc_bld.row("balance", coeffs, "==", 0.0)
        h_entries.append((r, t, 1.0))
    rc, _, _ = rc_bld.build()

    T = sparse.csc_matrix(
        ([v for _, _, v in t_entries],
         ([r for r, _, _ in t_entries], [c for _, c, _ in t_entries])),
        shape=(rc.m, fs.n))
    H = sparse.csc_matrix(
        ([v for _, _, v in h_entries],
         ([r for r, _, _ in h_entries], [c for _, c, _ in h_entries])),
        shape=(rc.m, n_periods))

    base = rng.uniform(0.3, 0.8, n_periods) * caps.sum()
    factors = rng.uniform(0.7, 1.3, (n_scenarios, n_periods))
    probs = rng.uniform(0.5, 1.5, n_scenarios)
    probs /= probs.sum()
    sc = ScenarioSet(base[None, :] * factors, probs)
    return TwoStageProblem(fs, RecourseTemplate(rc, T, H), ints, sc)
