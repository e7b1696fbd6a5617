"""Branch-and-bound tests against exhaustive enumeration oracles."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from shplan.lp import LE, EQ, GE, LpBuilder
from shplan.mip import MipSolution, MixedIntegerProgram, solve_mip

INF = np.inf


def enumerate_mip(mip):
    """Exact optimum by trying every integer assignment (inner LPs via scipy)."""
    lp = mip.lp
    int_cols = list(mip.integer_cols)
    cont = [j for j in range(lp.n) if j not in int_cols]
    A = lp.A.toarray()
    best = None
    ranges = [range(int(np.ceil(lp.lo[j])), int(np.floor(lp.up[j])) + 1) for j in int_cols]
    for assign in itertools.product(*ranges):
        if not cont:
            x = np.zeros(lp.n)
            x[int_cols] = assign
            ok = True
            for i in range(lp.m):
                r = A[i] @ x
                if lp.senses[i] == LE and r > lp.b[i] + 1e-9:
                    ok = False
                elif lp.senses[i] == GE and r < lp.b[i] - 1e-9:
                    ok = False
                elif lp.senses[i] == EQ and abs(r - lp.b[i]) > 1e-9:
                    ok = False
                if not ok:
                    break
            if ok:
                v = float(lp.c @ x)
                if best is None or v < best[0]:
                    best = (v, x)
            continue
        # fix integers, optimize the continuous remainder
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        fixed = np.zeros(lp.n)
        fixed[int_cols] = assign
        base = A @ fixed
        for i in range(lp.m):
            row = A[i, cont]
            rhs = lp.b[i] - base[i]
            if lp.senses[i] == LE:
                A_ub.append(row); b_ub.append(rhs)
            elif lp.senses[i] == GE:
                A_ub.append(-row); b_ub.append(-rhs)
            else:
                A_eq.append(row); b_eq.append(rhs)
        bounds = [(lp.lo[j] if np.isfinite(lp.lo[j]) else None,
                   lp.up[j] if np.isfinite(lp.up[j]) else None) for j in cont]
        res = linprog(lp.c[cont], A_ub or None, b_ub or None, A_eq or None,
                      b_eq or None, bounds=bounds, method="highs")
        if res.status == 0:
            v = float(res.fun + lp.c[int_cols] @ np.asarray(assign, float))
            if best is None or v < best[0]:
                x = fixed.copy()
                x[cont] = res.x
                best = (v, x)
    return best


def knapsack(values, weights, cap):
    bld = LpBuilder()
    for k, v in enumerate(values):
        bld.var(("take", k), lo=0.0, up=1.0, obj=-float(v), integer=True)
    bld.row("cap", {("take", k): float(w) for k, w in enumerate(weights)}, "<=", cap)
    lp, idx, ints = bld.build()
    return MixedIntegerProgram(lp, ints), idx


def test_knapsack_exact():
    mip, idx = knapsack([10, 13, 7, 8], [3, 4, 2, 3], 7)
    sol = solve_mip(mip, gap_tol=0.0)
    assert sol.status == "optimal"
    ref = enumerate_mip(mip)
    assert sol.objective == pytest.approx(ref[0], abs=1e-9)
    assert sol.gap == pytest.approx(0.0, abs=1e-12)


def test_integral_root_short_circuit():
    # LP relaxation already integral: totally unimodular assignment
    bld = LpBuilder()
    cost = [[4.0, 2.0], [1.0, 3.0]]
    for i in range(2):
        for j in range(2):
            bld.var(("a", i, j), lo=0.0, up=1.0, obj=cost[i][j], integer=True)
    for i in range(2):
        bld.row("r", {("a", i, 0): 1.0, ("a", i, 1): 1.0}, "==", 1.0)
    for j in range(2):
        bld.row("c", {("a", 0, j): 1.0, ("a", 1, j): 1.0}, "==", 1.0)
    lp, _, ints = bld.build()
    sol = solve_mip(MixedIntegerProgram(lp, ints))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.nodes <= 2


def toy_commit_problem(demand=(0.0, 8.0, 8.0), shed_cost=100.0):
    """Single unit, 3 periods, startup cost: classic on/off timing choice."""
    bld = LpBuilder()
    T = len(demand)
    for t in range(T):
        bld.var(("on", t), lo=0.0, up=1.0, obj=5.0, integer=True)
        bld.var(("start", t), lo=0.0, up=1.0, obj=10.0, integer=True)
        bld.var(("g", t), lo=0.0, obj=1.0)
        bld.var(("shed", t), lo=0.0, obj=shed_cost)
    for t in range(T):
        prev = {("on", t - 1): 1.0} if t > 0 else {}
        bld.row("commit_link", {("on", t): 1.0, ("start", t): -1.0, **{k: -v for k, v in prev.items()}},
                "<=", 0.0)
        bld.row("capacity_hi", {("g", t): 1.0, ("on", t): -10.0}, "<=", 0.0)
        bld.row("balance", {("g", t): 1.0, ("shed", t): 1.0}, "==", float(demand[t]))
    lp, idx, ints = bld.build()
    return MixedIntegerProgram(lp, ints), idx


def test_toy_commitment_vs_enumeration():
    mip, idx = toy_commit_problem()
    sol = solve_mip(mip, gap_tol=0.0)
    ref = enumerate_mip(mip)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref[0], abs=1e-8)
    x = sol.x
    assert x[idx[("on", 0)]] == pytest.approx(0.0, abs=1e-6)
    assert x[idx[("on", 1)]] == pytest.approx(1.0, abs=1e-6)
    assert x[idx[("on", 2)]] == pytest.approx(1.0, abs=1e-6)


def random_mixed_binary(rng, n_bin, n_cont):
    bld = LpBuilder()
    for k in range(n_bin):
        bld.var(("b", k), lo=0.0, up=1.0, obj=round(rng.normal(), 2), integer=True)
    for k in range(n_cont):
        bld.var(("y", k), lo=0.0, up=3.0, obj=round(rng.normal(), 2))
    nvar = n_bin + n_cont
    m = int(rng.integers(2, 6))
    keys = [("b", k) for k in range(n_bin)] + [("y", k) for k in range(n_cont)]
    x0 = np.concatenate([rng.integers(0, 2, n_bin).astype(float), rng.uniform(0, 3, n_cont)])
    for i in range(m):
        mask = rng.random(nvar) < 0.6
        if not mask.any():
            mask[rng.integers(0, nvar)] = True
        coefs = np.round(rng.normal(size=nvar), 2) * mask
        sense = ["<=", ">="][int(rng.integers(0, 2))]
        rhs = float(coefs @ x0)
        rhs += abs(rng.normal()) if sense == "<=" else -abs(rng.normal())
        bld.row("r", {keys[j]: coefs[j] for j in range(nvar) if coefs[j] != 0.0}, sense, rhs)
    lp, _, ints = bld.build()
    return MixedIntegerProgram(lp, ints)


def test_random_instances_match_enumeration():
    rng = np.random.default_rng(123)
    for trial in range(25):
        n_bin = int(rng.integers(2, 9))
        n_cont = int(rng.integers(0, 4))
        mip = random_mixed_binary(rng, n_bin, n_cont)
        sol = solve_mip(mip, gap_tol=0.0)
        ref = enumerate_mip(mip)
        if ref is None:
            assert sol.status == "infeasible", f"trial {trial}"
        else:
            assert sol.status == "optimal", f"trial {trial}"
            assert sol.objective == pytest.approx(ref[0], abs=1e-7), f"trial {trial}"
            assert sol.bound <= sol.objective + 1e-9
            assert sol.gap <= 1e-12


def test_valid_cut_callback_preserves_optimum():
    mip, idx = knapsack([10, 13, 7, 8], [3, 4, 2, 3], 7)
    base = solve_mip(mip, gap_tol=0.0)

    calls = []

    def cb(x):
        calls.append(x.copy())
        if len(calls) > 1:
            return None
        # sum of binaries <= n is valid for every feasible point
        n = mip.lp.n
        return [(list(range(n)), [1.0] * n, "<=", float(n))]

    with_cut = solve_mip(mip, gap_tol=0.0, cut_callback=cb)
    assert with_cut.objective == pytest.approx(base.objective, abs=1e-9)
    assert len(calls) >= 1


def test_node_limit_reports_partial():
    rng = np.random.default_rng(5)
    mip = random_mixed_binary(rng, 8, 2)
    sol = solve_mip(mip, gap_tol=0.0, node_limit=2)
    assert sol.status in ("node_limit", "optimal", "infeasible")
    if sol.status == "node_limit" and sol.objective is not None:
        assert sol.bound <= sol.objective + 1e-9


def test_deterministic_repeat():
    rng = np.random.default_rng(9)
    mip = random_mixed_binary(rng, 7, 3)
    a = solve_mip(mip, gap_tol=0.0)
    b = solve_mip(mip, gap_tol=0.0)
    assert a.status == b.status
    if a.status == "optimal":
        assert a.objective == b.objective
        np.testing.assert_array_equal(a.x, b.x)
        assert a.nodes == b.nodes
