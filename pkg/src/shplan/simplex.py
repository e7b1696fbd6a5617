"""Stateful bounded-variable revised simplex engine.

One engine instance owns a mutable LP in slack form (``A x + s = b`` with
per-column bounds) plus a dense basis inverse, and supports the incremental
edits the rest of the package leans on:

  * ``set_rhs`` / ``set_rhs_rows``  - warm dual re-solves over scenario chains,
  * ``set_bounds``                  - branch-and-bound node switches,
  * ``add_row``                     - cutting planes (bordered inverse update),
  * ``update_column``               - epigraph-column rewrites (Sherman-Morrison).

The iterate loops live in the backend twins ``_simplex_cy`` (compiled) and
``_simplex_py`` (NumPy reference); ``SHPLAN_PURE_PYTHON=1`` forces the
fallback.  Tolerances: primal feasibility and dual optimality both default to
1e-7 and are configurable via :class:`SimplexOptions`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ModelError, SolverNumericsError

if os.environ.get("SHPLAN_PURE_PYTHON"):
    from . import _simplex_py as _loops
else:
    try:
        from . import _simplex_cy as _loops  # type: ignore[attr-defined]
        if not hasattr(_loops, "dual_loop"):
            raise ImportError("compiled core incomplete")
    except ImportError:
        from . import _simplex_py as _loops

BACKEND = _loops.BACKEND_NAME

AT_LO = 0
AT_UP = 1
BASIC = 2
FREE = 3

LE, EQ, GE = 0, 1, 2
_SENSE_CHARS = {"<": LE, "<=": LE, "=": EQ, "==": EQ, ">": GE, ">=": GE}

_INF = np.inf


def sense_code(s):
    if isinstance(s, str):
        try:
            return _SENSE_CHARS[s]
        except KeyError:
            raise ModelError(f"unknown row sense {s!r}") from None
    s = int(s)
    if s not in (LE, EQ, GE):
        raise ModelError(f"unknown row sense {s!r}")
    return s


@dataclass
class SimplexOptions:
    ftol: float = 1e-7          # primal feasibility tolerance
    dtol: float = 1e-7          # dual feasibility / optimality tolerance
    ptol: float = 1e-9          # smallest acceptable pivot magnitude
    teps: float = 1e-9          # ratio-test tie window
    refactor_every: int = 120   # pivots between dense refactorizations
    stall_limit: int = 300      # no-progress iterations before Bland's rule
    max_iters: int = 200000


class _State:
    """Attribute bag shared with the iterate-loop backends."""

    __slots__ = (
        "m", "n", "ncol", "ap", "ai", "ax", "Acsc", "b", "c", "lo", "up",
        "vstat", "basis", "bpos", "Binv", "xB", "y", "d",
        "ftol", "dtol", "ptol", "teps", "stall_limit", "max_iters",
        "iters", "pivots", "next_refactor",
    )


class SimplexEngine:
    def __init__(self, c, A, senses, b, lo, up, options=None):
        opts = options or SimplexOptions()
        self.opts = opts
        A = sparse.csc_matrix(A, dtype=np.float64, copy=True)  # update_column edits in place
        m, n = A.shape
        c = np.asarray(c, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        lo = np.asarray(lo, dtype=np.float64)
        up = np.asarray(up, dtype=np.float64)
        if not (c.shape == (n,) and lo.shape == (n,) and up.shape == (n,) and b.shape == (m,)):
            raise ModelError("mismatched LP dimensions")
        if np.any(lo > up + 1e-12):
            raise ModelError("variable lower bound exceeds upper bound")

        self.senses = np.array([sense_code(s) for s in senses], dtype=np.int8)
        if self.senses.shape != (m,):
            raise ModelError("senses length does not match row count")

        st = _State()
        st.m, st.n, st.ncol = m, n, n + m
        st.Acsc = A
        st.ap = A.indptr.astype(np.int64)
        st.ai = A.indices.astype(np.int64)
        st.ax = A.data.astype(np.float64)
        st.b = b.copy()
        slack_lo = np.where(self.senses == GE, -_INF, 0.0)
        slack_up = np.where(self.senses == LE, _INF, 0.0)
        st.c = np.concatenate([c, np.zeros(m)])
        st.lo = np.concatenate([lo, slack_lo])
        st.up = np.concatenate([up, slack_up])

        st.vstat = np.empty(st.ncol, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lo[j]):
                st.vstat[j] = AT_LO
            elif np.isfinite(up[j]):
                st.vstat[j] = AT_UP
            else:
                st.vstat[j] = FREE
        st.vstat[n:] = BASIC
        st.basis = np.arange(n, n + m, dtype=np.int64)
        st.bpos = np.full(st.ncol, -1, dtype=np.int64)
        st.bpos[n:] = np.arange(m)
        st.Binv = np.eye(m)
        st.xB = np.zeros(m)
        st.y = np.zeros(m)
        st.d = st.c.copy()

        st.ftol, st.dtol, st.ptol, st.teps = opts.ftol, opts.dtol, opts.ptol, opts.teps
        st.stall_limit = opts.stall_limit
        st.max_iters = opts.max_iters
        st.iters = 0
        st.pivots = 0
        st.next_refactor = opts.refactor_every

        self.st = st
        self._xB_stale = True
        self._duals_stale = True
        self._factor_stale = False
        self.log: list[str] = []

    # ------------------------------------------------------------------ state

    @property
    def backend(self):
        return BACKEND

    @property
    def m(self):
        return self.st.m

    @property
    def n(self):
        return self.st.n

    def _nonbasic_values(self):
        st = self.st
        v = np.where(st.vstat == AT_UP, st.up, st.lo)
        v[st.vstat == FREE] = 0.0
        return v

    def _recompute_xB(self):
        st = self.st
        v = self._nonbasic_values()
        v[st.basis] = 0.0
        r = st.b - st.Acsc.dot(v[: st.n]) - v[st.n:]
        st.xB = st.Binv @ r
        self._xB_stale = False

    def _price_full(self):
        st = self.st
        st.y = st.Binv.T @ st.c[st.basis]
        d = np.empty(st.ncol)
        d[: st.n] = st.c[: st.n] - st.Acsc.T.dot(st.y)
        d[st.n:] = st.c[st.n:] - st.y
        d[st.basis] = 0.0
        st.d = d
        self._duals_stale = False

    def _refactor(self):
        st = self.st
        B = np.zeros((st.m, st.m))
        for p in range(st.m):
            j = st.basis[p]
            if j < st.n:
                k0, k1 = st.ap[j], st.ap[j + 1]
                B[st.ai[k0:k1], p] = st.ax[k0:k1]
            else:
                B[j - st.n, p] = 1.0
        try:
            st.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self.log.append("singular basis; reset to slack basis")
            st.vstat[:] = np.where(np.isfinite(st.lo), AT_LO,
                                   np.where(np.isfinite(st.up), AT_UP, FREE)).astype(np.int8)
            st.vstat[st.n:] = BASIC
            st.basis = np.arange(st.n, st.ncol, dtype=np.int64)
            st.bpos[:] = -1
            st.bpos[st.n:] = np.arange(st.m)
            st.Binv = np.eye(st.m)
        st.next_refactor = st.pivots + self.opts.refactor_every
        self._factor_stale = False
        self._recompute_xB()
        self._price_full()

    def _ftran(self, j):
        st = self.st
        if j < st.n:
            k0, k1 = st.ap[j], st.ap[j + 1]
            if k0 == k1:
                return np.zeros(st.m)
            return st.Binv[:, st.ai[k0:k1]] @ st.ax[k0:k1]
        return st.Binv[:, j - st.n].copy()

    def primal_infeasibility(self):
        st = self.st
        lob = st.lo[st.basis]
        upb = st.up[st.basis]
        v = np.maximum(lob - st.xB, st.xB - upb)
        return float(max(v.max(initial=0.0), 0.0))

    def dual_infeasibility(self):
        st = self.st
        d = st.d
        fixed = st.up - st.lo <= 0.0
        bad_lo = (st.vstat == AT_LO) & ~fixed
        bad_up = (st.vstat == AT_UP) & ~fixed
        fr = st.vstat == FREE
        worst = 0.0
        if np.any(bad_lo):
            worst = max(worst, float(-(d[bad_lo].min(initial=0.0))))
        if np.any(bad_up):
            worst = max(worst, float(d[bad_up].max(initial=0.0)))
        if np.any(fr):
            worst = max(worst, float(np.abs(d[fr]).max(initial=0.0)))
        return worst

    # ------------------------------------------------------------------ edits

    def set_rhs(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.st.m,):
            raise ModelError("rhs length mismatch")
        self.st.b = b.copy()
        self._xB_stale = True

    def set_rhs_rows(self, rows, values):
        self.st.b[np.asarray(rows, dtype=np.int64)] = values
        self._xB_stale = True

    def set_bounds(self, j, lo, up):
        st = self.st
        if not 0 <= j < st.n:
            raise ModelError("set_bounds only applies to structural columns")
        if lo > up + 1e-12:
            raise ModelError("lower bound exceeds upper bound")
        old_lo, old_up = st.lo[j], st.up[j]
        st.lo[j], st.up[j] = lo, up
        if st.vstat[j] == BASIC:
            return
        if st.vstat[j] == FREE:
            if np.isfinite(lo) or np.isfinite(up):
                st.vstat[j] = AT_LO if np.isfinite(lo) else AT_UP
                self._xB_stale = True
            return
        if st.vstat[j] == AT_LO:
            old_val, new_val = old_lo, lo
            if not np.isfinite(new_val):
                st.vstat[j] = AT_UP if np.isfinite(up) else FREE
                new_val = up if np.isfinite(up) else 0.0
        else:
            old_val, new_val = old_up, up
            if not np.isfinite(new_val):
                st.vstat[j] = AT_LO if np.isfinite(lo) else FREE
                new_val = lo if np.isfinite(lo) else 0.0
        if new_val != old_val:
            if self._xB_stale:
                return
            st.xB -= (new_val - old_val) * self._ftran(j)

    def add_row(self, cols, vals, sense, rhs):
        """Append one row (structural coefficients only); its slack enters the basis."""
        st = self.st
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        sc = sense_code(sense)
        if cols.size and (cols.min() < 0 or cols.max() >= st.n):
            raise ModelError("add_row column index out of range")

        row = sparse.csc_matrix((vals, (np.zeros(cols.size, dtype=np.int64), cols)),
                                shape=(1, st.n))
        st.Acsc = sparse.vstack([st.Acsc, row], format="csc")
        st.ap = st.Acsc.indptr.astype(np.int64)
        st.ai = st.Acsc.indices.astype(np.int64)
        st.ax = st.Acsc.data.astype(np.float64)

        m_old = st.m
        # bordered inverse: the new slack is basic in the new row position
        g = np.zeros(m_old)
        for k, j in enumerate(cols):
            p = st.bpos[j]
            if p >= 0:
                g[p] += vals[k]
        Binv = np.zeros((m_old + 1, m_old + 1))
        Binv[:m_old, :m_old] = st.Binv
        Binv[m_old, :m_old] = -(g @ st.Binv)
        Binv[m_old, m_old] = 1.0
        st.Binv = Binv

        row_val = 0.0
        if not self._xB_stale:
            row_val = float(sum(vals[k] * self._col_value(int(j)) for k, j in enumerate(cols)))

        self.senses = np.append(self.senses, np.int8(sc))
        st.b = np.append(st.b, float(rhs))
        slack_lo = -_INF if sc == GE else 0.0
        slack_up = _INF if sc == LE else 0.0

        # slack ids follow the structurals, so the new slack id is the old ncol
        st.c = np.append(st.c, 0.0)
        st.lo = np.append(st.lo, slack_lo)
        st.up = np.append(st.up, slack_up)
        st.vstat = np.append(st.vstat, np.int8(BASIC))
        st.bpos = np.append(st.bpos, np.int64(m_old))
        st.basis = np.append(st.basis, np.int64(st.ncol))
        st.xB = np.append(st.xB, float(rhs) - row_val)
        st.y = np.append(st.y, 0.0)
        st.d = np.append(st.d, 0.0)
        st.m += 1
        st.ncol += 1

    def update_column(self, j, rows, new_vals):
        """Replace values of existing entries of structural column j."""
        st = self.st
        if not 0 <= j < st.n:
            raise ModelError("update_column only applies to structural columns")
        k0, k1 = st.ap[j], st.ap[j + 1]
        idx = st.ai[k0:k1]
        rows = np.asarray(rows, dtype=np.int64)
        pos = k0 + np.searchsorted(idx, rows)
        if np.any(pos >= k1) or np.any(st.ai[pos] != rows):
            raise ModelError("update_column may only rewrite existing entries")
        old = st.ax[pos].copy()
        delta = np.asarray(new_vals, dtype=np.float64) - old
        if not np.any(delta):
            return
        st.ax[pos] = new_vals
        st.Acsc.data[pos] = new_vals

        p = st.bpos[j]
        if p >= 0:
            u = st.Binv[:, rows] @ delta
            denom = 1.0 + u[p]
            if abs(denom) < 1e-10:
                self._factor_stale = True
            else:
                st.Binv -= np.outer(u, st.Binv[p, :]) / denom
        self._xB_stale = True
        self._duals_stale = True

    def _col_value(self, j):
        st = self.st
        p = st.bpos[j]
        if p >= 0:
            return float(st.xB[p])
        s = st.vstat[j]
        if s == AT_LO:
            return float(st.lo[j])
        if s == AT_UP:
            return float(st.up[j])
        return 0.0

    def snapshot_basis(self):
        return self.st.vstat.copy(), self.st.basis.copy()

    def load_basis(self, snap):
        vstat, basis = snap
        st = self.st
        if vstat.shape[0] != st.ncol or basis.shape[0] != st.m:
            raise ModelError("basis snapshot does not match model shape")
        st.vstat = vstat.copy()
        st.basis = basis.copy()
        st.bpos = np.full(st.ncol, -1, dtype=np.int64)
        st.bpos[st.basis] = np.arange(st.m)
        self._factor_stale = True
        self._duals_stale = True
        self._xB_stale = True

    # ------------------------------------------------------------------ solve

    def _run(self, fn, *args):
        while True:
            code = fn(self.st, *args)
            if code == _loops.LOOP_REFACTOR:
                self._refactor()
                continue
            return code

    def solve(self):
        """Re-optimize after any sequence of edits.

        Returns one of 'optimal', 'infeasible', 'unbounded'.  Raises
        SolverNumericsError when both the warm attempt and a fresh start stall.
        """
        st = self.st
        st.iters = 0  # per-solve budget; engines live across many re-solves
        for attempt in (0, 1):
            if self._factor_stale:
                self._refactor()
            if self._xB_stale:
                self._recompute_xB()
            if self._duals_stale:
                self._price_full()
            status = self._solve_once()
            if status != "numeric":
                return status
            self.log.append(f"numerical stall (attempt {attempt}); refactor and restart")
            self._reset_to_slack_basis()
        raise SolverNumericsError("simplex stalled after restart", self.log)

    def _reset_to_slack_basis(self):
        st = self.st
        st.vstat[: st.n] = np.where(np.isfinite(st.lo[: st.n]), AT_LO,
                                    np.where(np.isfinite(st.up[: st.n]), AT_UP, FREE)).astype(np.int8)
        st.vstat[st.n:] = BASIC
        st.basis = np.arange(st.n, st.ncol, dtype=np.int64)
        st.bpos = np.full(st.ncol, -1, dtype=np.int64)
        st.bpos[st.n:] = np.arange(st.m)
        st.Binv = np.eye(st.m)
        st.next_refactor = st.pivots + self.opts.refactor_every
        self._recompute_xB()
        self._price_full()

    def _solve_once(self):
        st = self.st
        pinf = self.primal_infeasibility()
        dinf = self.dual_infeasibility()

        if pinf <= st.ftol and dinf <= st.dtol:
            return "optimal"

        if dinf <= st.dtol:
            code = self._run(_loops.dual_loop)
            if code == _loops.LOOP_DONE:
                return self._verify()
            if code == _loops.LOOP_INFEASIBLE:
                return "infeasible"
            return "numeric"

        if pinf > st.ftol:
            code = self._run(_loops.primal_loop, True)
            if code == _loops.LOOP_INFEASIBLE:
                return "infeasible"
            if code != _loops.LOOP_DONE:
                return "numeric"
            self._price_full()

        code = self._run(_loops.primal_loop, False)
        if code == _loops.LOOP_DONE:
            return self._verify()
        if code == _loops.LOOP_UNBOUNDED:
            return "unbounded"
        return "numeric"

    def _verify(self):
        # cheap consistency gate so a drifted basis never reports optimal
        if self.primal_infeasibility() > 100 * self.st.ftol:
            return "numeric"
        self._price_full()
        if self.dual_infeasibility() > 100 * self.st.dtol:
            code = self._run(_loops.primal_loop, False)
            if code != _loops.LOOP_DONE:
                return "numeric"
        return "optimal"

    # ------------------------------------------------------------------ reads

    def full_x(self):
        st = self.st
        v = self._nonbasic_values()
        v[st.basis] = st.xB
        return v

    def objective(self):
        st = self.st
        return float(self.full_x() @ st.c)

    def duals(self):
        return self.st.y[: self.st.m].copy()

    def reduced_costs(self):
        return self.st.d[: self.st.n].copy()
