"""Pure-NumPy simplex iterate loops.

This module is the reference twin of the compiled core ``_simplex_cy``.  Both
expose the same three functions over the same state object:

    primal_loop(state, phase1)  -> loop code
    dual_loop(state)            -> loop code

The engine in :mod:`shplan.simplex` owns factorization, pricing entry points
and phase orchestration; the loops only pivot.  Keeping the loops free of
LAPACK calls lets the compiled twin mirror this file line for line.

Conventions (see simplex.py for the full state layout):
  * columns 0..n-1 are structural, n..n+m-1 are row slacks (coefficient +1),
  * ``vstat`` holds AT_LO=0, AT_UP=1, BASIC=2, FREE=3,
  * ``Binv`` is the dense inverse of the current basis matrix,
  * reduced costs ``d`` and duals ``y`` are maintained incrementally by the
    dual loop and recomputed from scratch by the primal loop each iteration.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

AT_LO = 0
AT_UP = 1
BASIC = 2
FREE = 3

LOOP_DONE = 0        # phase goal reached
LOOP_INFEASIBLE = 1  # phase-1 optimum with residual infeasibility / dual ray
LOOP_UNBOUNDED = 2   # primal ray in phase 2
LOOP_REFACTOR = 3    # pivot budget reached, caller should refactor and re-enter
LOOP_STALL = 4       # no progress even under Bland's rule

_INF = np.inf


def _ftran(state, j):
    """w = Binv @ A[:, j] for structural or slack column j."""
    if j < state.n:
        k0, k1 = state.ap[j], state.ap[j + 1]
        idx = state.ai[k0:k1]
        if idx.size == 0:
            return np.zeros(state.m)
        return state.Binv[:, idx] @ state.ax[k0:k1]
    return state.Binv[:, j - state.n].copy()


def _price_structural(state, y):
    """A^T y over structural columns (slack part is just y)."""
    return state.Acsc.T.dot(y)


def _nonbasic_values(state):
    """Implied values of nonbasic columns (basic entries are garbage)."""
    v = np.where(state.vstat == AT_UP, state.up, state.lo)
    v[state.vstat == FREE] = 0.0
    return v


def _reduced_costs(state):
    y = state.Binv.T @ state.c[state.basis]
    d = np.empty(state.ncol)
    d[: state.n] = state.c[: state.n] - _price_structural(state, y)
    d[state.n:] = state.c[state.n:] - y
    return y, d


def _phase1_costs(state):
    """Gradient of the bound-violation sum w.r.t. basic values."""
    g = np.zeros(state.m)
    xb = state.xB
    lob = state.lo[state.basis]
    upb = state.up[state.basis]
    g[xb < lob - state.ftol] = -1.0
    g[xb > upb + state.ftol] = 1.0
    return g


def _infeas_sum(state):
    xb = state.xB
    lob = state.lo[state.basis]
    upb = state.up[state.basis]
    return float(np.sum(np.maximum(lob - xb, 0.0)) + np.sum(np.maximum(xb - upb, 0.0)))


def _choose_entering(state, d, bland):
    """Dantzig pricing with lowest-index ties; Bland mode picks lowest index.

    Returns (j, direction) or (-1, 0) when no eligible column remains.
    """
    dtol = state.dtol
    vstat = state.vstat
    fixed = state.up - state.lo <= 0.0
    down = (vstat == AT_UP) & (d > dtol) & ~fixed
    upel = (vstat == AT_LO) & (d < -dtol) & ~fixed
    fr = vstat == FREE
    score = np.zeros(state.ncol)
    score[upel] = -d[upel]
    score[down] = d[down]
    score[fr] = np.abs(d[fr])
    score[fr & (score <= dtol)] = 0.0
    elig = score > 0.0
    if not np.any(elig):
        return -1, 0
    if bland:
        j = int(np.argmax(elig))
    else:
        j = int(np.argmax(score))
    if vstat[j] == AT_UP:
        return j, -1
    if vstat[j] == FREE:
        return j, (1 if d[j] < 0 else -1)
    return j, 1


def _primal_ratio(state, j, sig, w, phase1):
    """Two-pass bounded ratio test.

    Returns (kind, p, step) with kind one of 'pivot', 'flip', 'ray'.
    In phase 1 a basic variable beyond a bound only blocks when moving back
    toward that bound, which keeps the piecewise objective linear per step.
    """
    m = state.m
    ptol = state.ptol
    teps = state.teps
    ftol = state.ftol
    basis = state.basis
    xB = state.xB
    lo = state.lo
    up = state.up

    rate = -sig * w
    tarr = np.full(m, _INF)
    barr = np.zeros(m, dtype=np.int8)  # which bound blocks: 0 lo, 1 up
    live = np.abs(w) > ptol
    for p in np.nonzero(live)[0]:
        r = basis[p]
        xv = xB[p]
        rp = rate[p]
        if phase1 and xv < lo[r] - ftol:
            bound, at_up = (lo[r], 0) if rp > 0.0 else (_INF, 0)
        elif phase1 and xv > up[r] + ftol:
            bound, at_up = (up[r], 1) if rp < 0.0 else (_INF, 0)
        elif rp < 0.0:
            bound, at_up = lo[r], 0
        else:
            bound, at_up = up[r], 1
        if not np.isfinite(bound):
            continue
        t = (bound - xv) / rp
        tarr[p] = t if t > 0.0 else 0.0
        barr[p] = at_up

    tmin = float(tarr.min()) if m else _INF
    trange = up[j] - lo[j] if state.vstat[j] != FREE else _INF

    if trange < tmin - teps:
        return "flip", -1, trange, 0
    if not np.isfinite(tmin):
        return "ray", -1, _INF, 0

    cand = np.nonzero(tarr <= tmin + teps)[0]
    best_p = -1
    best_w = -1.0
    best_r = -1
    for p in cand:
        aw = abs(w[p])
        r = int(basis[p])
        take = best_p < 0 or aw > best_w * (1.0 + 1e-9)
        if not take and aw >= best_w * (1.0 - 1e-9) and r < best_r:
            take = True
        if take:
            best_p, best_w, best_r = int(p), aw, r
    return "pivot", best_p, float(max(tarr[best_p], 0.0)), int(barr[best_p])


def _apply_pivot(state, j, sig, w, p, t, leave_at_up):
    """Move t along the edge, swap j into basis position p."""
    basis = state.basis
    vstat = state.vstat
    xB = state.xB
    r = basis[p]

    if vstat[j] == AT_LO:
        xj = state.lo[j]
    elif vstat[j] == AT_UP:
        xj = state.up[j]
    else:
        xj = 0.0
    xB -= (sig * t) * w
    xj_new = xj + sig * t

    # leaving variable exits at the bound it blocked on
    vstat[r] = AT_UP if leave_at_up else AT_LO
    if state.lo[r] == state.up[r]:
        vstat[r] = AT_LO
    state.bpos[r] = -1
    basis[p] = j
    state.bpos[j] = p
    vstat[j] = BASIC

    piv = w[p]
    Binv = state.Binv
    Binv[p, :] /= piv
    w2 = w.copy()
    w2[p] = 0.0
    Binv -= np.outer(w2, Binv[p, :])
    xB[p] = xj_new
    state.pivots += 1


def _total_obj(state):
    v = _nonbasic_values(state)
    nb = state.vstat != BASIC
    return float(state.c[state.basis] @ state.xB + state.c[nb] @ v[nb])


def primal_loop(state, phase1):
    """Primal simplex over the current basis.

    Phase 1 minimizes the total bound violation of the basic solution; phase 2
    minimizes c'x from a primal-feasible basis.  Reduced costs are recomputed
    each iteration (phase-1 costs change with the violation pattern).
    """
    bland = False
    no_progress = 0
    while True:
        if state.pivots >= state.next_refactor:
            return LOOP_REFACTOR
        if state.iters >= state.max_iters:
            return LOOP_STALL

        if phase1:
            g = _phase1_costs(state)
            if not np.any(g):
                return LOOP_DONE
            y = state.Binv.T @ g
            d = np.empty(state.ncol)
            d[: state.n] = -_price_structural(state, y)
            d[state.n:] = -y
            merit = _infeas_sum(state)
        else:
            y, d = _reduced_costs(state)
            merit = _total_obj(state)

        d[state.basis] = 0.0
        j, sig = _choose_entering(state, d, bland)
        if j < 0:
            return LOOP_INFEASIBLE if phase1 else LOOP_DONE

        w = _ftran(state, j)
        kind, p, t, leave_at_up = _primal_ratio(state, j, sig, w, phase1)
        state.iters += 1

        if kind == "ray":
            if phase1:
                return LOOP_STALL  # cannot happen for a sound phase-1 direction
            return LOOP_UNBOUNDED
        if kind == "flip":
            state.xB -= (sig * t) * w
            state.vstat[j] = AT_UP if state.vstat[j] == AT_LO else AT_LO
        else:
            _apply_pivot(state, j, sig, w, p, t, leave_at_up)

        merit_after = _infeas_sum(state) if phase1 else _total_obj(state)
        if merit - merit_after > state.teps:
            no_progress = 0
        else:
            no_progress += 1
        if no_progress > state.stall_limit:
            if bland:
                return LOOP_STALL
            bland = True
            no_progress = 0
        if phase1 and merit_after <= state.ftol:
            return LOOP_DONE


def _dual_pick_leaving(state):
    xb = state.xB
    lob = state.lo[state.basis]
    upb = state.up[state.basis]
    viol = np.maximum(lob - xb, xb - upb)
    p = int(np.argmax(viol))
    if viol[p] <= state.ftol:
        return -1, False
    # deterministic tie-break: lowest leaving variable index
    cand = np.nonzero(viol >= viol[p] - state.teps)[0]
    if cand.size > 1:
        p = int(cand[np.argmin(state.basis[cand])])
    return p, bool(xb[p] < lob[p])


def _dual_ratio(state, d, alpha, below, bland):
    """Entering choice preserving dual feasibility.

    Returns (j, theta) or (-1, 0) when the dual is unbounded (primal
    infeasible).  theta <= 0 when the leaving variable exits at its lower
    bound, >= 0 at its upper bound.
    """
    ptol = state.ptol
    vstat = state.vstat
    fixed = state.up - state.lo <= 0.0
    if below:
        elig = ((vstat == AT_LO) & (alpha < -ptol)) | ((vstat == AT_UP) & (alpha > ptol))
    else:
        elig = ((vstat == AT_LO) & (alpha > ptol)) | ((vstat == AT_UP) & (alpha < -ptol))
    elig |= (vstat == FREE) & (np.abs(alpha) > ptol)
    elig &= ~fixed
    idx = np.nonzero(elig)[0]
    if idx.size == 0:
        return -1, 0.0

    ratios = d[idx] / alpha[idx]
    if below:
        best = float(ratios.max())
    else:
        best = float(ratios.min())
    tol = state.teps * (1.0 + abs(best))
    near = idx[np.abs(ratios - best) <= tol]
    if bland or near.size == 1:
        j = int(near.min())
    else:
        j = int(near[np.argmax(np.abs(alpha[near]))])
    return j, float(d[j] / alpha[j])


def dual_loop(state):
    """Dual simplex from a dual-feasible basis; maintains y and d in place."""
    bland = False
    degen = 0
    while True:
        if state.pivots >= state.next_refactor:
            return LOOP_REFACTOR
        if state.iters >= state.max_iters:
            return LOOP_STALL

        p, below = _dual_pick_leaving(state)
        if p < 0:
            return LOOP_DONE

        rho = state.Binv[p, :].copy()
        alpha = np.empty(state.ncol)
        alpha[: state.n] = _price_structural(state, rho)
        alpha[state.n:] = rho

        j, theta = _dual_ratio(state, state.d, alpha, below, bland)
        if j < 0:
            return LOOP_INFEASIBLE
        state.iters += 1

        r = state.basis[p]
        bound = state.lo[r] if below else state.up[r]
        delta = (state.xB[p] - bound) / alpha[j]

        w = _ftran(state, j)
        if state.vstat[j] == AT_LO:
            xj = state.lo[j]
        elif state.vstat[j] == AT_UP:
            xj = state.up[j]
        else:
            xj = 0.0

        state.xB -= delta * w
        state.vstat[r] = AT_LO if below else AT_UP
        state.bpos[r] = -1
        state.basis[p] = j
        state.bpos[j] = p
        state.vstat[j] = BASIC

        piv = w[p]
        Binv = state.Binv
        Binv[p, :] /= piv
        w2 = w.copy()
        w2[p] = 0.0
        Binv -= np.outer(w2, Binv[p, :])
        state.xB[p] = xj + delta
        state.pivots += 1

        # incremental dual update; alpha of remaining basics is 0, of r is 1
        state.y += theta * rho
        state.d -= theta * alpha
        state.d[j] = 0.0

        if abs(theta) <= state.teps:
            degen += 1
        else:
            degen = 0
        if degen > state.stall_limit:
            if bland:
                return LOOP_STALL
            bland = True
            degen = 0
