"""LP core tests.

Oracles:
  * an active-set vertex enumerator for tiny LPs (exact, exponential),
  * scipy.optimize.linprog (HiGHS) for random medium LPs,
  * hand-derived duals for the textbook cases.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import linprog

from shplan.errors import ModelError
from shplan.lp import (
    EQ, GE, LE, LinearProgram, LpBuilder, duality_gap, extract_duals,
    make_engine, solve_lp, write_lp_text,
)

INF = np.inf


def dense_lp(c, A, senses, b, lo, up, **kw):
    A = sparse.csc_matrix(np.asarray(A, dtype=float))
    return LinearProgram(
        c=np.asarray(c, float), A=A,
        senses=np.asarray([{"<=": LE, "==": EQ, ">=": GE}[s] for s in senses], dtype=np.int8),
        b=np.asarray(b, float), lo=np.asarray(lo, float), up=np.asarray(up, float), **kw)


def enumerate_optimum(lp, tol=1e-9):
    """Brute-force optimum by trying every active-set combination."""
    n = lp.n
    A = lp.A.toarray()
    ineqs = []   # (a, rhs) meaning a.x <= rhs
    eqs = []     # (a, rhs)
    for i in range(lp.m):
        if lp.senses[i] == LE:
            ineqs.append((A[i], lp.b[i]))
        elif lp.senses[i] == GE:
            ineqs.append((-A[i], -lp.b[i]))
        else:
            eqs.append((A[i], lp.b[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lp.up[j]):
            ineqs.append((e, lp.up[j]))
        if np.isfinite(lp.lo[j]):
            ineqs.append((-e, -lp.lo[j]))

    def feasible(x):
        for a, r in ineqs:
            if a @ x > r + tol:
                return False
        for a, r in eqs:
            if abs(a @ x - r) > tol:
                return False
        return True

    best = None
    need = n - len(eqs)
    if need < 0:
        return None
    for combo in itertools.combinations(range(len(ineqs)), need):
        M = np.array([a for a, _ in eqs] + [ineqs[k][0] for k in combo])
        r = np.array([v for _, v in eqs] + [ineqs[k][1] for k in combo])
        if M.shape[0] != n:
            continue
        try:
            x = np.linalg.solve(M, r)
        except np.linalg.LinAlgError:
            continue
        if feasible(x):
            v = float(lp.c @ x)
            if best is None or v < best[0]:
                best = (v, x)
    return best


# ---------------------------------------------------------------- hand cases

def test_single_var_binding_lower():
    lp = dense_lp([1.0], [[1.0]], [">="], [1.0], [0.0], [INF])
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-9)
    assert extract_duals(sol)[0] == pytest.approx(1.0, abs=1e-9)


def test_equality_dual_is_cost():
    lp = dense_lp([2.0], [[1.0]], ["=="], [10.0], [0.0], [INF])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(20.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(2.0, abs=1e-9)


def test_nonbinding_row_zero_dual():
    lp = dense_lp([1.0], [[1.0]], ["<="], [5.0], [0.0], [INF])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    assert sol.duals[0] == pytest.approx(0.0, abs=1e-9)


def test_transportation_duals():
    # two supplies (cap 10 each), two demands (8, 6); costs c[i][j]
    bld = LpBuilder()
    cost = {(0, 0): 1.0, (0, 1): 3.0, (1, 0): 4.0, (1, 1): 1.5}
    for (i, j), cc in cost.items():
        bld.var(("f", i, j), lo=0.0, obj=cc)
    for i in range(2):
        bld.row("supply", {("f", i, 0): 1.0, ("f", i, 1): 1.0}, "<=", 10.0)
    for j, dem in enumerate((8.0, 6.0)):
        bld.row("demand", {("f", 0, j): 1.0, ("f", 1, j): 1.0}, "==", dem)
    lp, idx, _ = bld.build()
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    # optimum ships 8 on (0,0), 6 on (1,1): cost 8 + 9 = 17
    assert sol.objective == pytest.approx(17.0, abs=1e-9)
    x = sol.x
    assert x[idx[("f", 0, 0)]] == pytest.approx(8.0, abs=1e-8)
    assert x[idx[("f", 1, 1)]] == pytest.approx(6.0, abs=1e-8)
    # supplies slack: zero duals; demand duals equal the serving marginal costs
    assert sol.duals[0] == pytest.approx(0.0, abs=1e-9)
    assert sol.duals[1] == pytest.approx(0.0, abs=1e-9)
    assert sol.duals[2] == pytest.approx(1.0, abs=1e-9)
    assert sol.duals[3] == pytest.approx(1.5, abs=1e-9)


def test_degenerate_face_deterministic():
    # two identical rows meeting at the optimum: solver must still finish
    lp = dense_lp([-1.0, -1.0],
                  [[1.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
                  ["<=", "<=", "<="], [4.0, 4.0, 2.0],
                  [0.0, 0.0], [INF, INF])
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-4.0, abs=1e-9)


def test_free_variable():
    lp = dense_lp([1.0, 0.5], [[1.0, 1.0]], ["=="], [3.0],
                  [0.0, -INF], [INF, INF])
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(1.5, abs=1e-9)
    assert sol.x[1] == pytest.approx(3.0, abs=1e-8)


def test_infeasible_detected():
    lp = dense_lp([1.0], [[1.0], [1.0]], [">=", "<="], [5.0, 2.0], [0.0], [INF])
    assert solve_lp(lp).status == "infeasible"


def test_unbounded_detected():
    lp = dense_lp([-1.0], [[1.0]], [">="], [1.0], [0.0], [INF])
    assert solve_lp(lp).status == "unbounded"


def test_fixed_variables_respected():
    lp = dense_lp([1.0, 1.0], [[1.0, 1.0]], [">="], [4.0],
                  [3.0, 0.0], [3.0, INF])
    sol = solve_lp(lp)
    assert sol.x[0] == pytest.approx(3.0)
    assert sol.x[1] == pytest.approx(1.0, abs=1e-8)


def test_extract_duals_rejects_nonoptimal():
    lp = dense_lp([1.0], [[1.0], [1.0]], [">=", "<="], [5.0, 2.0], [0.0], [INF])
    sol = solve_lp(lp)
    with pytest.raises(ModelError):
        extract_duals(sol)


# ------------------------------------------------------------- dcopf oracle

def three_bus_case(d3=120.0, cap12=40.0):
    """2 generators + 1 load on a triangle network, susceptance 10 each."""
    bld = LpBuilder()
    bld.var(("g", 1), lo=0.0, up=100.0, obj=10.0)
    bld.var(("g", 2), lo=0.0, up=100.0, obj=25.0)
    bld.var(("th", 2), lo=-0.5, up=0.5)
    bld.var(("th", 3), lo=-0.5, up=0.5)
    bld.var(("f", 1, 2), lo=-cap12, up=cap12)
    bld.var(("f", 1, 3), lo=-100.0, up=100.0)
    bld.var(("f", 2, 3), lo=-100.0, up=100.0)
    B = 400.0  # susceptance large enough that angle bounds stay slack
    bld.row("dc_flow", {("f", 1, 2): 1.0, ("th", 2): B}, "==", 0.0)
    bld.row("dc_flow", {("f", 1, 3): 1.0, ("th", 3): B}, "==", 0.0)
    bld.row("dc_flow", {("f", 2, 3): 1.0, ("th", 2): -B, ("th", 3): B}, "==", 0.0)
    bld.row("balance", {("g", 1): 1.0, ("f", 1, 2): -1.0, ("f", 1, 3): -1.0}, "==", 0.0)
    bld.row("balance", {("g", 2): 1.0, ("f", 1, 2): 1.0, ("f", 2, 3): -1.0}, "==", 0.0)
    bld.row("balance", {("f", 1, 3): 1.0, ("f", 2, 3): 1.0}, "==", d3)
    return bld.build()


def test_three_bus_dcopf_vertex_enumeration():
    lp, idx, _ = three_bus_case()
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    ref = enumerate_optimum(lp)
    assert ref is not None
    assert sol.objective == pytest.approx(ref[0], rel=1e-8, abs=1e-8)
    assert duality_gap(lp, sol) <= 1e-6 * (1 + abs(sol.objective))


def test_three_bus_congestion_prices_differ():
    lp, idx, _ = three_bus_case(d3=120.0, cap12=5.0)
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    # line limit binds: bus-3 balance dual exceeds bus-1 marginal cost
    assert sol.duals[5] > 10.0 + 1e-6


# ------------------------------------------------- randomized vs enumerator

def random_tiny_lp(rng):
    n = rng.integers(2, 5)
    m = rng.integers(1, 5)
    A = np.round(rng.normal(size=(m, n)) * rng.binomial(1, 0.7, size=(m, n)), 2)
    c = np.round(rng.normal(size=n), 2)
    b = np.round(rng.normal(scale=2.0, size=m), 2)
    senses = [["<=", ">=", "=="][k] for k in rng.integers(0, 3, size=m)]
    lo = np.zeros(n)
    up = np.full(n, 10.0)  # bounded box keeps the enumerator exact
    return dense_lp(c, A, senses, b, lo, up)


def test_random_tiny_vs_enumeration():
    rng = np.random.default_rng(42)
    solved = 0
    for _ in range(60):
        lp = random_tiny_lp(rng)
        sol = solve_lp(lp)
        ref = enumerate_optimum(lp)
        if ref is None:
            assert sol.status == "infeasible"
            continue
        solved += 1
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(ref[0], rel=1e-7, abs=1e-7)
        assert duality_gap(lp, sol) <= 1e-6 * (1 + abs(sol.objective))
    assert solved >= 20


# ------------------------------------------------------ randomized vs scipy

def random_medium_lp(rng, anchored=True):
    n = int(rng.integers(8, 30))
    m = int(rng.integers(4, 25))
    dens = 0.4
    A = rng.normal(size=(m, n)) * (rng.random(size=(m, n)) < dens)
    c = rng.normal(size=n)
    senses = [["<=", ">=", "=="][k] for k in rng.integers(0, 3, size=m)]
    lo = np.where(rng.random(n) < 0.8, 0.0, -INF)
    up = np.where(rng.random(n) < 0.5, rng.uniform(1.0, 20.0, size=n), INF)
    free = rng.random(n) < 0.1
    lo[free], up[free] = -INF, INF
    if anchored:
        # anchor the rhs at a bound-feasible point so most draws are feasible
        x0 = np.clip(rng.normal(size=n), np.where(np.isfinite(lo), lo, -2.0),
                     np.where(np.isfinite(up), up, 2.0))
        b = A @ x0
        for i, s in enumerate(senses):
            pad = abs(rng.normal(scale=1.0))
            b[i] += pad if s == "<=" else (-pad if s == ">=" else 0.0)
    else:
        b = rng.normal(scale=3.0, size=m)
    return dense_lp(c, A, senses, b, lo, up)


def test_random_medium_vs_scipy_unanchored():
    rng = np.random.default_rng(11)
    seen = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(60):
        lp = random_medium_lp(rng, anchored=False)
        sol = solve_lp(lp)
        ref = scipy_solve(lp)
        if ref.status == 0:
            assert sol.status == "optimal"
            assert sol.objective == pytest.approx(ref.fun, rel=1e-6, abs=1e-6)
        elif ref.status == 2:
            assert sol.status == "infeasible"
        elif ref.status == 3:
            assert sol.status == "unbounded"
        seen[sol.status] += 1
    assert seen["infeasible"] >= 10


def scipy_solve(lp):
    A = lp.A.toarray()
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(lp.m):
        if lp.senses[i] == LE:
            A_ub.append(A[i]); b_ub.append(lp.b[i])
        elif lp.senses[i] == GE:
            A_ub.append(-A[i]); b_ub.append(-lp.b[i])
        else:
            A_eq.append(A[i]); b_eq.append(lp.b[i])
    bounds = [(lp.lo[j] if np.isfinite(lp.lo[j]) else None,
               lp.up[j] if np.isfinite(lp.up[j]) else None) for j in range(lp.n)]
    return linprog(lp.c, A_ub or None, b_ub or None, A_eq or None, b_eq or None,
                   bounds=bounds, method="highs")


def test_random_medium_vs_scipy():
    rng = np.random.default_rng(7)
    statuses = {"optimal": 0, "infeasible": 0, "unbounded": 0}
    for _ in range(120):
        lp = random_medium_lp(rng)
        sol = solve_lp(lp)
        ref = scipy_solve(lp)
        if ref.status == 0:
            assert sol.status == "optimal", f"scipy optimal {ref.fun}, got {sol.status}"
            assert sol.objective == pytest.approx(ref.fun, rel=1e-6, abs=1e-6)
            assert duality_gap(lp, sol) <= 1e-5 * (1 + abs(sol.objective))
        elif ref.status == 2:
            assert sol.status == "infeasible"
        elif ref.status == 3:
            assert sol.status == "unbounded"
        statuses[sol.status] += 1
    assert statuses["optimal"] >= 60


# ------------------------------------------------------------- warm starts

def test_warm_start_zero_iterations():
    lp, _, _ = three_bus_case()
    sol = solve_lp(lp)
    again = solve_lp(lp, warm_basis=sol.basis)
    assert again.status == "optimal"
    assert again.iterations == 0
    assert again.objective == pytest.approx(sol.objective, abs=1e-10)


def test_cost_scaling_same_argmin():
    lp, _, _ = three_bus_case()
    sol1 = solve_lp(lp)
    lp2 = LinearProgram(c=lp.c * 3.5, A=lp.A, senses=lp.senses, b=lp.b, lo=lp.lo, up=lp.up)
    sol2 = solve_lp(lp2)
    np.testing.assert_allclose(sol1.x, sol2.x, atol=1e-7)
    assert sol2.objective == pytest.approx(3.5 * sol1.objective, rel=1e-9)


# --------------------------------------------------------- incremental ops

def test_engine_rhs_chain_matches_cold():
    lp, idx, _ = three_bus_case()
    eng = make_engine(lp)
    assert eng.solve() == "optimal"
    rng = np.random.default_rng(3)
    for _ in range(25):
        b = lp.b.copy()
        b[5] = rng.uniform(40.0, 160.0)  # demand row
        eng.set_rhs(b)
        assert eng.solve() == "optimal"
        warm_obj = eng.objective()
        lp_cold = LinearProgram(c=lp.c, A=lp.A, senses=lp.senses, b=b, lo=lp.lo, up=lp.up)
        cold = solve_lp(lp_cold)
        assert warm_obj == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)


def test_engine_bounds_change_matches_cold():
    lp, idx, _ = three_bus_case()
    eng = make_engine(lp)
    assert eng.solve() == "optimal"
    j = idx[("g", 1)]
    for hi in (60.0, 100.0, 30.0, 80.0):
        eng.set_bounds(j, 0.0, hi)
        assert eng.solve() == "optimal"
        lp2 = LinearProgram(c=lp.c, A=lp.A, senses=lp.senses, b=lp.b,
                            lo=lp.lo.copy(), up=lp.up.copy())
        lp2.up[j] = hi
        cold = solve_lp(lp2)
        assert eng.objective() == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)


def test_engine_add_row_matches_cold():
    lp, idx, _ = three_bus_case()
    eng = make_engine(lp)
    assert eng.solve() == "optimal"
    j1 = idx[("g", 1)]
    eng.add_row([j1], [1.0], "<=", 70.0)  # cap the cheap unit below its optimum
    assert eng.solve() == "optimal"

    bld_lp = LinearProgram(
        c=lp.c,
        A=sparse.vstack([lp.A, sparse.csc_matrix(([1.0], ([0], [j1])), shape=(1, lp.n))], format="csc"),
        senses=np.append(lp.senses, np.int8(LE)),
        b=np.append(lp.b, 70.0),
        lo=lp.lo, up=lp.up)
    cold = solve_lp(bld_lp)
    assert eng.objective() == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)
    assert eng.duals()[-1] != pytest.approx(0.0, abs=1e-9)  # new row binds


def test_engine_update_column_matches_cold():
    lp, idx, _ = three_bus_case()
    eng = make_engine(lp)
    assert eng.solve() == "optimal"
    j = idx[("g", 2)]
    rows = lp.A[:, j].nonzero()[0]
    eng.update_column(j, rows, [0.5])
    assert eng.solve() == "optimal"
    A2 = lp.A.tolil(copy=True)
    A2[rows[0], j] = 0.5
    cold = solve_lp(LinearProgram(c=lp.c, A=A2.tocsc(), senses=lp.senses,
                                  b=lp.b, lo=lp.lo, up=lp.up))
    assert eng.objective() == pytest.approx(cold.objective, rel=1e-8, abs=1e-8)


def test_write_lp_text_smoke(tmp_path):
    lp, _, _ = three_bus_case()
    p = tmp_path / "model.txt"
    with open(p, "w") as fp:
        write_lp_text(lp, fp)
    text = p.read_text()
    assert "[balance]" in text and "[dc_flow]" in text and "bounds:" in text
