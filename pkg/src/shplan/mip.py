"""Branch-and-bound for mixed-binary programs over the simplex engine.

One engine instance carries the whole tree: node switches are bound diffs
repaired by the dual simplex, cutting planes are appended rows (valid
globally), and children inherit the parent's basis for warm starts.

Search policy: best-bound node selection, most-fractional branching with
lowest-index ties, an LP-rounding heuristic for the initial incumbent.
Integrality tolerance 1e-6; default relative gap tolerance 1e-4.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .lp import LinearProgram, make_engine

INT_TOL = 1e-6


@dataclass
class MixedIntegerProgram:
    """A LinearProgram plus integrality markers (column indices)."""

    lp: LinearProgram
    integer_cols: np.ndarray

    def __post_init__(self):
        self.integer_cols = np.asarray(self.integer_cols, dtype=np.int64)
        if self.integer_cols.size:
            if self.integer_cols.min() < 0 or self.integer_cols.max() >= self.lp.n:
                raise ModelError("integer column index out of range")


@dataclass
class MipSolution:
    status: str                  # optimal | infeasible | unbounded | node_limit
    objective: float | None
    x: np.ndarray | None
    bound: float                 # global lower bound at termination
    gap: float                   # (objective - bound) / max(1, |objective|)
    nodes: int
    basis: tuple | None = None


def _most_fractional(x, int_cols):
    best_j = -1
    best_f = INT_TOL
    for j in int_cols:
        f = abs(x[j] - round(x[j]))
        if f > best_f + 1e-15:
            best_f = f
            best_j = int(j)
    return best_j


class _Tree:
    """Bound bookkeeping for the open-node heap."""

    def __init__(self):
        self.heap = []
        self.seq = 0

    def push(self, bound, node_bounds):
        heapq.heappush(self.heap, (bound, self.seq, node_bounds))
        self.seq += 1

    def pop(self):
        return heapq.heappop(self.heap)

    def best_bound(self):
        return self.heap[0][0] if self.heap else np.inf

    def __len__(self):
        return len(self.heap)


def solve_mip(mip, gap_tol=1e-4, node_limit=200000, cut_callback=None, options=None):
    """Solve min c'x with integrality on ``mip.integer_cols``.

    ``cut_callback(x) -> None | [(cols, vals, sense, rhs), ...]`` is invoked on
    every integer-feasible candidate; returned rows must be valid for every
    integer-feasible point (they are added globally and never removed).
    """
    lp = mip.lp
    int_cols = mip.integer_cols
    eng = make_engine(lp, options)
    orig_lo = lp.lo.copy()
    orig_up = lp.up.copy()

    status = eng.solve()
    if status == "infeasible":
        return MipSolution("infeasible", None, None, np.inf, np.inf, 1)
    if status == "unbounded":
        return MipSolution("unbounded", None, None, -np.inf, np.inf, 1)

    incumbent = None
    inc_obj = np.inf
    inc_basis = None
    nodes = 1
    applied: dict[int, tuple[float, float]] = {}

    def apply_node(nb):
        for j in list(applied):
            if j not in nb:
                eng.set_bounds(j, orig_lo[j], orig_up[j])
                del applied[j]
        for j, (lo_, up_) in nb.items():
            if applied.get(j) != (lo_, up_):
                eng.set_bounds(j, lo_, up_)
                applied[j] = (lo_, up_)

    def candidate_loop():
        """Run the cut callback to a fixed point at the engine's optimum.

        Returns ('accept', x, obj), ('fractional',), or ('infeasible',).
        """
        for _ in range(1000):
            x = eng.full_x()[: lp.n]
            if cut_callback is None:
                return "accept", x, eng.objective()
            cuts = cut_callback(x)
            if not cuts:
                return "accept", x, eng.objective()
            for cols, vals, sense, rhs in cuts:
                eng.add_row(cols, vals, sense, rhs)
            if eng.solve() == "infeasible":
                return ("infeasible",)
            if _most_fractional(eng.full_x()[: lp.n], int_cols) >= 0:
                return ("fractional",)
        raise ModelError("cut callback did not reach a fixed point")

    def try_incumbent():
        nonlocal incumbent, inc_obj, inc_basis
        res = candidate_loop()
        if res[0] != "accept":
            return res[0]
        _, x, obj = res
        if obj < inc_obj - 1e-12:
            incumbent = x.copy()
            inc_obj = obj
            inc_basis = eng.snapshot_basis()
        return "accept"

    # LP-rounding heuristic for the initial incumbent
    x_root = eng.full_x()[: lp.n]
    root_obj = eng.objective()
    if int_cols.size and _most_fractional(x_root, int_cols) >= 0:
        nb = {}
        for j in int_cols:
            v = float(np.clip(round(x_root[j]), orig_lo[j], orig_up[j]))
            nb[int(j)] = (v, v)
        apply_node(nb)
        if eng.solve() == "optimal":
            try_incumbent()
        apply_node({})
        if eng.solve() != "optimal":  # cuts from the heuristic may bind
            return MipSolution("infeasible", None, None, np.inf, np.inf, nodes)
        root_obj = eng.objective()
        x_root = eng.full_x()[: lp.n]

    tree = _Tree()
    jf = _most_fractional(x_root, int_cols)
    if jf < 0:
        res = try_incumbent()
        if res == "fractional":
            tree.push(eng.objective(), {})
        elif res == "accept" and cut_callback is not None:
            # cuts may have moved the optimum; the accepted point is incumbent,
            # but the relaxation bound must be re-examined
            if _most_fractional(eng.full_x()[: lp.n], int_cols) >= 0:
                tree.push(eng.objective(), {})
    else:
        tree.push(root_obj, {})

    final_open = np.inf
    while len(tree):
        if nodes >= node_limit:
            bound = min(tree.best_bound(), inc_obj)
            gap = (inc_obj - bound) / max(1.0, abs(inc_obj)) if incumbent is not None else np.inf
            return MipSolution("node_limit", inc_obj if incumbent is not None else None,
                               incumbent, bound, gap, nodes, inc_basis)
        bound, _, nb = tree.pop()
        if bound >= inc_obj - 1e-12:
            final_open = bound
            break  # best-bound order: nothing left can improve
        if incumbent is not None:
            gap = (inc_obj - bound) / max(1.0, abs(inc_obj))
            if gap <= gap_tol:
                final_open = bound
                break

        apply_node(nb)
        nodes += 1
        if eng.solve() != "optimal":
            continue  # infeasible subproblem
        obj = eng.objective()
        if obj >= inc_obj - 1e-12:
            continue
        x = eng.full_x()[: lp.n]
        j = _most_fractional(x, int_cols)
        if j < 0:
            res = try_incumbent()
            if res == "fractional":
                tree.push(eng.objective(), dict(nb))
            continue
        v = x[j]
        lo_j = nb.get(j, (orig_lo[j], orig_up[j]))[0]
        up_j = nb.get(j, (orig_lo[j], orig_up[j]))[1]
        down = dict(nb)
        down[j] = (lo_j, float(np.floor(v)))
        up_ = dict(nb)
        up_[j] = (float(np.ceil(v)), up_j)
        tree.push(obj, down)
        tree.push(obj, up_)

    if incumbent is None:
        return MipSolution("infeasible", None, None, np.inf, np.inf, nodes)
    bound = min(inc_obj, final_open, tree.best_bound())
    gap = max(0.0, (inc_obj - bound) / max(1.0, abs(inc_obj)))
    return MipSolution("optimal", float(inc_obj), incumbent, float(bound), float(gap),
                       nodes, inc_basis)
