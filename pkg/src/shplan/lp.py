"""Linear program container, builder, and stateless solve facade.

The solver is the bounded-variable revised simplex in :mod:`shplan.simplex`
(primal and dual, dense basis inverse, warm starts).  ``solve_lp`` is the
one-shot entry point; long-lived :class:`shplan.simplex.SimplexEngine`
instances are used directly where re-solve chains matter.

Dual sign convention: ``duals[i]`` is the derivative of the optimal objective
with respect to ``b[i]``.  For ``min x  s.t.  x >= 1`` the binding row has
dual 1; for ``min 2x  s.t.  x == 10`` it has dual 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ModelError
from .simplex import BACKEND, LE, EQ, GE, SimplexEngine, SimplexOptions, sense_code

__all__ = [
    "LinearProgram", "LpSolution", "LpBuilder", "solve_lp", "extract_duals",
    "write_lp_text", "BACKEND", "LE", "EQ", "GE", "SimplexOptions",
]

_INF = np.inf
_SENSE_STR = {LE: "<=", EQ: "==", GE: ">="}


@dataclass
class LinearProgram:
    """min c'x  s.t.  A x (senses) b,  lo <= x <= up."""

    c: np.ndarray
    A: sparse.csc_matrix
    senses: np.ndarray          # int8 codes LE/EQ/GE
    b: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    col_names: list | None = None
    row_names: list | None = None
    row_kinds: list | None = None

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]


@dataclass
class LpSolution:
    status: str                      # optimal | infeasible | unbounded
    objective: float | None
    x: np.ndarray | None
    duals: np.ndarray | None         # d(objective)/d(b), one per row
    reduced_costs: np.ndarray | None
    basis: tuple | None              # warm-start snapshot (vstat, basis)
    iterations: int = 0


class LpBuilder:
    """Row-wise model assembly with hashable variable keys.

    Keys are arbitrary hashables (tuples like ``("gen", "G2", 7)``); ``build``
    returns the positional model plus the key -> column map.
    """

    def __init__(self):
        self._idx = {}
        self._lo = []
        self._up = []
        self._obj = []
        self._integer = []
        self._rows = []          # (kind, name, cols, vals, sense_code, rhs)

    def var(self, key, lo=0.0, up=_INF, obj=0.0, integer=False):
        if key in self._idx:
            raise ModelError(f"duplicate variable {key!r}")
        j = len(self._lo)
        self._idx[key] = j
        self._lo.append(float(lo))
        self._up.append(float(up))
        self._obj.append(float(obj))
        if integer:
            self._integer.append(j)
        return j

    def has(self, key):
        return key in self._idx

    def index(self, key):
        return self._idx[key]

    def add_obj(self, key, coef):
        self._obj[self._idx[key]] += float(coef)

    def row(self, kind, coeffs, sense, rhs, name=None):
        cols = []
        vals = []
        acc = {}
        for key, v in (coeffs.items() if isinstance(coeffs, dict) else coeffs):
            j = self._idx[key]
            acc[j] = acc.get(j, 0.0) + float(v)
        for j in sorted(acc):
            cols.append(j)
            vals.append(acc[j])
        self._rows.append((kind, name or kind, cols, vals, sense_code(sense), float(rhs)))
        return len(self._rows) - 1

    @property
    def num_vars(self):
        return len(self._lo)

    @property
    def num_rows(self):
        return len(self._rows)

    def build(self):
        n = len(self._lo)
        m = len(self._rows)
        data, ri, ci = [], [], []
        senses = np.empty(m, dtype=np.int8)
        b = np.empty(m)
        kinds = []
        names = []
        for i, (kind, name, cols, vals, sc, rhs) in enumerate(self._rows):
            ri.extend([i] * len(cols))
            ci.extend(cols)
            data.extend(vals)
            senses[i] = sc
            b[i] = rhs
            kinds.append(kind)
            names.append(name)
        A = sparse.csc_matrix((data, (ri, ci)), shape=(m, n))
        col_names = [None] * n
        for key, j in self._idx.items():
            col_names[j] = key
        lp = LinearProgram(
            c=np.asarray(self._obj, dtype=np.float64),
            A=A,
            senses=senses,
            b=b,
            lo=np.asarray(self._lo, dtype=np.float64),
            up=np.asarray(self._up, dtype=np.float64),
            col_names=col_names,
            row_names=names,
            row_kinds=kinds,
        )
        return lp, dict(self._idx), np.asarray(self._integer, dtype=np.int64)


def make_engine(lp, options=None):
    return SimplexEngine(lp.c, lp.A, lp.senses, lp.b, lp.lo, lp.up, options)


def solve_lp(lp, warm_basis=None, options=None):
    """Solve an LP; re-solving with the returned basis warm-starts in 0 pivots."""
    eng = make_engine(lp, options)
    if warm_basis is not None:
        try:
            eng.load_basis(warm_basis)
        except ModelError:
            pass  # stale snapshot from another model shape: fall back to cold
    status = eng.solve()
    if status != "optimal":
        return LpSolution(status=status, objective=None, x=None, duals=None,
                          reduced_costs=None, basis=None, iterations=eng.st.iters)
    x = eng.full_x()[: lp.n]
    return LpSolution(
        status="optimal",
        objective=float(lp.c @ x),
        x=x,
        duals=eng.duals(),
        reduced_costs=eng.reduced_costs(),
        basis=eng.snapshot_basis(),
        iterations=eng.st.iters,
    )


def extract_duals(solution):
    """Row duals of an optimal solution, d(objective)/d(rhs)."""
    if solution.status != "optimal":
        raise ModelError(f"duals undefined for status {solution.status!r}")
    return solution.duals.copy()


def duality_gap(lp, sol):
    """|primal - dual| objective residual of a bounded-variable optimum."""
    y = sol.duals
    d = sol.reduced_costs
    dual_obj = float(y @ lp.b)
    at_lo = (d > 0) & np.isfinite(lp.lo)
    at_up = (d < 0) & np.isfinite(lp.up)
    dual_obj += float(d[at_lo] @ lp.lo[at_lo]) + float(d[at_up] @ lp.up[at_up])
    return abs(dual_obj - sol.objective)


def write_lp_text(lp, fp):
    """Human-readable dump: one row per line, keyed by row kind."""
    def vname(j):
        nm = lp.col_names[j] if lp.col_names else None
        return str(nm) if nm is not None else f"x{j}"

    A = lp.A.tocsr()
    fp.write(f"minimize: {' + '.join(f'{lp.c[j]:.12g}*{vname(j)}' for j in np.nonzero(lp.c)[0])}\n")
    fp.write("subject to:\n")
    for i in range(lp.m):
        kind = lp.row_kinds[i] if lp.row_kinds else "row"
        name = lp.row_names[i] if lp.row_names else str(i)
        lo_, hi_ = A.indptr[i], A.indptr[i + 1]
        terms = " + ".join(f"{A.data[k]:.12g}*{vname(A.indices[k])}" for k in range(lo_, hi_))
        fp.write(f"  [{kind}] {name}: {terms} {_SENSE_STR[int(lp.senses[i])]} {lp.b[i]:.12g}\n")
    fp.write("bounds:\n")
    for j in range(lp.n):
        fp.write(f"  {lp.lo[j]:.12g} <= {vname(j)} <= {lp.up[j]:.12g}\n")
