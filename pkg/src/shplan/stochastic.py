"""Two-stage stochastic LP/MIP solvers.

A problem is a first-stage program plus a recourse LP template whose
right-hand side is affine in the first-stage point and the random vector:

    rhs(x, xi) = h0 + T x + H xi

with h0 carried in ``recourse.lp.b``.  Because only the RHS moves, one
simplex engine solves every recourse instance by dual warm starts, and an
optimal dual vector pi yields the affine minorant

    Q(x', xi') >= Q(x, xi) + pi' (rhs(x', xi') - rhs(x, xi))

used for every cut in this module.

Solvers:
  * ``extensive_form``   deterministic equivalent over a finite scenario set
  * ``solve_lshaped``    Benders/L-shaped for MIP first stage + finite set
  * ``solve_sd``         regularized stochastic decomposition (sequential
                         sampling, LP both stages, recourse cost >= 0)
  * ``validate_statistical_optimality``  fresh-sample gap test
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy import stats

from .errors import ModelError
from .lp import LE, EQ, GE, LinearProgram, make_engine
from .mip import MipSolution, MixedIntegerProgram, solve_mip

_INF = np.inf


@dataclass
class ScenarioSet:
    """Finite support: one realization per row, probabilities summing to 1."""

    points: np.ndarray            # (S, k) realization vectors
    probs: np.ndarray             # (S,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (self.points.shape[0],):
            raise ModelError("scenario probabilities do not match points")
        if np.any(self.probs < -1e-12) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ModelError("scenario probabilities must be a distribution")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self):
        return self.probs @ self.points


@dataclass
class RecourseTemplate:
    """Recourse LP with rhs = lp.b + T x + H xi; matrix and costs fixed."""

    lp: LinearProgram
    T: sparse.csc_matrix          # (m2, n1) first-stage coupling into rhs
    H: sparse.csc_matrix          # (m2, k) scenario coupling into rhs

    def __post_init__(self):
        self.T = sparse.csc_matrix(self.T, dtype=np.float64)
        self.H = sparse.csc_matrix(self.H, dtype=np.float64)
        if self.T.shape[0] != self.lp.m or self.H.shape[0] != self.lp.m:
            raise ModelError("coupling matrix row count does not match recourse LP")

    def rhs(self, x, xi):
        return self.lp.b + self.T @ x + self.H @ xi


@dataclass
class TwoStageProblem:
    first_stage: LinearProgram
    recourse: RecourseTemplate
    integer_cols: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    scenarios: ScenarioSet | None = None
    sampler: object | None = None   # callable(rng, n) -> (n, k) array

    def __post_init__(self):
        self.integer_cols = np.asarray(self.integer_cols, dtype=np.int64)
        if self.first_stage.n != self.recourse.T.shape[1]:
            raise ModelError("first-stage coupling width does not match variable count")

    @property
    def n1(self):
        return self.first_stage.n

    def draw(self, rng, n):
        """Sample n realizations from the sampler or the finite set."""
        if self.sampler is not None:
            out = np.atleast_2d(np.asarray(self.sampler(rng, n), dtype=np.float64))
            if out.shape[0] != n:
                raise ModelError("sampler returned wrong number of realizations")
            return out
        if self.scenarios is None:
            raise ModelError("problem has neither sampler nor scenario set")
        idx = rng.choice(len(self.scenarios), size=n, p=self.scenarios.probs)
        return self.scenarios.points[idx]


def mean_value_problem(problem, scenarios=None):
    """Same problem with the scenario set collapsed to its mean point."""
    sc = scenarios if scenarios is not None else problem.scenarios
    if sc is None:
        raise ModelError("mean-value problem needs a finite scenario set")
    return TwoStageProblem(problem.first_stage, problem.recourse,
                           problem.integer_cols,
                           ScenarioSet(sc.mean()[None, :], np.array([1.0])))


# ------------------------------------------------------------- recourse oracle

class RecourseOracle:
    """One warm engine answering Q(x, xi) for a fixed recourse template."""

    def __init__(self, recourse, options=None):
        self.rt = recourse
        self.eng = make_engine(recourse.lp, options)
        self.solves = 0

    def solve_rhs(self, rhs, context=""):
        self.eng.set_rhs(rhs)
        status = self.eng.solve()
        self.solves += 1
        if status != "optimal":
            raise ModelError(f"recourse LP {status}{context}: worst row "
                             f"{self._worst_row(rhs)}")
        return self.eng.objective(), self.eng.duals()

    def solve(self, x, xi, context=""):
        return self.solve_rhs(self.rt.rhs(x, xi), context)

    def _worst_row(self, rhs):
        lp = self.rt.lp
        y = self.eng.full_x()[: lp.n]
        r = lp.A @ y - rhs
        viol = np.where(lp.senses == LE, np.maximum(r, 0.0),
                        np.where(lp.senses == GE, np.maximum(-r, 0.0), np.abs(r)))
        i = int(np.argmax(viol)) if viol.size else -1
        label = None
        if lp.row_names is not None and 0 <= i < len(lp.row_names):
            label = lp.row_names[i]
        elif lp.row_kinds is not None and 0 <= i < len(lp.row_kinds):
            label = lp.row_kinds[i]
        return f"{i} ({label})" if label else str(i)


def expected_recourse(problem, x, scenarios=None, oracle=None, options=None):
    """(expected value, per-scenario values) of the recourse at first-stage x."""
    sc = scenarios if scenarios is not None else problem.scenarios
    if sc is None:
        raise ModelError("expected_recourse needs a finite scenario set")
    orc = oracle or RecourseOracle(problem.recourse, options)
    base = problem.recourse.lp.b + problem.recourse.T @ np.asarray(x, dtype=np.float64)
    hxi = problem.recourse.H @ sc.points.T         # (m2, S)
    vals = np.empty(len(sc))
    for s in range(len(sc)):
        vals[s], _ = orc.solve_rhs(base + hxi[:, s], context=f" in scenario {s}")
    return float(sc.probs @ vals), vals


def evaluate(problem, x, scenarios=None, oracle=None, options=None):
    """Total cost c1'x + E[Q(x, xi)] over the (given) scenario set."""
    q, _ = expected_recourse(problem, x, scenarios, oracle, options)
    return float(problem.first_stage.c @ np.asarray(x, dtype=np.float64)) + q


# -------------------------------------------------------------- extensive form

def extensive_form(problem, scenarios=None):
    """Deterministic equivalent: first stage plus one recourse block per scenario.

    Returns (MixedIntegerProgram, meta) with meta = {"n1", "n2", "S"}.
    """
    sc = scenarios if scenarios is not None else problem.scenarios
    if sc is None:
        raise ModelError("extensive form needs a finite scenario set")
    fs, rt = problem.first_stage, problem.recourse
    n1, m1 = fs.n, fs.m
    n2, m2 = rt.lp.n, rt.lp.m
    S = len(sc)

    upper = sparse.hstack([fs.A, sparse.csc_matrix((m1, S * n2))])
    lower = sparse.hstack([sparse.vstack([-rt.T] * S),
                           sparse.block_diag([rt.lp.A] * S)])
    A = sparse.vstack([upper, lower], format="csc")

    hxi = (rt.H @ sc.points.T).T                   # (S, m2)
    b = np.concatenate([fs.b, (rt.lp.b[None, :] + hxi).ravel()])
    c = np.concatenate([fs.c, np.kron(sc.probs, rt.lp.c)])
    senses = np.concatenate([fs.senses, np.tile(rt.lp.senses, S)])
    lo = np.concatenate([fs.lo, np.tile(rt.lp.lo, S)])
    up = np.concatenate([fs.up, np.tile(rt.lp.up, S)])

    lp = LinearProgram(c, A, senses.astype(np.int8), b, lo, up)
    return MixedIntegerProgram(lp, problem.integer_cols), {"n1": n1, "n2": n2, "S": S}


def solve_extensive(problem, scenarios=None, gap_tol=0.0, options=None):
    """Solve the deterministic equivalent; returns (MipSolution, first-stage x)."""
    mip, meta = extensive_form(problem, scenarios)
    sol = solve_mip(mip, gap_tol=gap_tol, options=options)
    x1 = sol.x[: meta["n1"]] if sol.x is not None else None
    return sol, x1


# ------------------------------------------------------------------- L-shaped

@dataclass
class CutRecord:
    alpha: float                  # intercept: cut is theta >= alpha + beta'x
    beta: np.ndarray              # (n1,)
    at_x: np.ndarray              # candidate that produced the cut
    expected: float               # E[Q] at that candidate
    theta: float                  # epigraph value when checked


@dataclass
class LShapedResult:
    solution: MipSolution
    x: np.ndarray | None          # first-stage part of the optimum
    expected_recourse: float | None
    cuts: list
    rounds: int
    log: list

    @property
    def objective(self):
        return self.solution.objective


def solve_lshaped(problem, gap_tol=1e-4, cut_tol=1e-6, theta_lb=0.0, options=None):
    """L-shaped method: branch-and-bound master with expected-value cuts.

    The master carries the first stage plus an epigraph variable theta for the
    expected recourse.  At every integer-feasible candidate all scenario
    recourse LPs are solved on one warm engine; the aggregated cut
    theta >= alpha + beta'x is added when violated by more than
    cut_tol * (1 + |theta|).  theta_lb must lower-bound the expected recourse
    (0 suits nonnegative recourse costs).
    """
    sc = problem.scenarios
    if sc is None:
        raise ModelError("solve_lshaped needs a finite scenario set")
    fs, rt = problem.first_stage, problem.recourse
    n1 = fs.n

    A = sparse.hstack([fs.A, sparse.csc_matrix((fs.m, 1))], format="csc")
    master = LinearProgram(np.concatenate([fs.c, [1.0]]), A, fs.senses, fs.b,
                           np.concatenate([fs.lo, [theta_lb]]),
                           np.concatenate([fs.up, [_INF]]))
    mip = MixedIntegerProgram(master, problem.integer_cols)

    oracle = RecourseOracle(rt, options)
    hxi = rt.H @ sc.points.T                       # (m2, S)
    probs = sc.probs
    cuts: list[CutRecord] = []
    log: list[dict] = []

    def callback(xfull):
        x = xfull[:n1]
        theta = float(xfull[n1])
        base = rt.lp.b + rt.T @ x
        qbar = 0.0
        pibar = np.zeros(rt.lp.m)
        for s in range(len(sc)):
            q, pi = oracle.solve_rhs(base + hxi[:, s], context=f" in scenario {s}")
            qbar += probs[s] * q
            pibar += probs[s] * pi
        beta = rt.T.T @ pibar
        alpha = qbar - float(beta @ x)
        violation = qbar - theta
        log.append({"round": len(log), "theta": theta, "expected": qbar,
                    "violation": violation, "cuts": len(cuts)})
        if violation <= cut_tol * (1.0 + abs(theta)):
            return None
        cuts.append(CutRecord(alpha, beta.copy(), x.copy(), qbar, theta))
        cols = list(np.nonzero(beta)[0]) + [n1]
        vals = [-beta[j] for j in np.nonzero(beta)[0]] + [1.0]
        return [(cols, vals, ">=", alpha)]

    sol = solve_mip(mip, gap_tol=gap_tol, cut_callback=callback, options=options)
    x1 = sol.x[:n1] if sol.x is not None else None
    exp_rec = float(sol.x[n1]) if sol.x is not None else None
    return LShapedResult(sol, x1, exp_rec, cuts, len(log), log)


# ------------------------------------------------- stochastic decomposition

@dataclass
class SdState:
    """Pool, cuts, and regularization state of one SD run.

    Pool entry p encodes the affine minorant  a[p] + pool_T[p]'x + pool_H[p]'xi
    of the recourse value.  A cut born at sample count kb with selection
    (sum intercept ssum, sum gradient wsum) is stored as the master row
        wsum'x - k eta <= -ssum
    whose eta coefficient is rewritten to the current -k every iteration;
    dividing by k shows this is the sample-average cut rescaled by kb/k,
    which stays valid because the recourse cost is nonnegative.
    """

    incumbent: np.ndarray
    incumbent_estimate: float
    pool_a: np.ndarray
    pool_T: np.ndarray            # (P, n1)
    pool_H: np.ndarray            # (P, k_xi)
    cuts: list                    # dicts: wsum, ssum, born, row, last_active
    sigma: float                  # proximal weight; box radius = r0 / sigma
    iteration: int
    samples: int


@dataclass
class SdResult:
    x: np.ndarray
    objective_estimate: float
    recourse_estimate: float
    model_bound: float            # master objective at the last iterate
    samples: int
    stopped: str                  # "stationary" | "max_samples"
    state: SdState
    log: list
    sample_points: np.ndarray | None = None   # (samples, k_xi) draws, in order


class _Pool:
    """Dual-vertex pool with FIFO eviction and the score matrix pool x samples."""

    def __init__(self, n1, kxi, cap):
        self.cap = cap
        self.n = 0
        self.a = np.empty(64)
        self.T = np.empty((64, n1))
        self.H = np.empty((64, kxi))
        self.SH = np.empty((64, 256))       # SH[p, i] = H[p] . xi_i
        self.nsamp = 0
        self.keys = {}
        self.order = []                     # insertion order for eviction

    @staticmethod
    def _grown(arr, shape):
        new = np.empty(shape)
        new[: arr.shape[0], : arr.shape[1]] = arr
        return new

    def _grow_rows(self):
        r = self.a.shape[0] * 2
        self.a = np.concatenate([self.a, np.empty(self.a.shape[0])])
        self.T = self._grown(self.T, (r, self.T.shape[1]))
        self.H = self._grown(self.H, (r, self.H.shape[1]))
        self.SH = self._grown(self.SH, (r, self.SH.shape[1]))

    def add_sample(self, xi):
        if self.nsamp == self.SH.shape[1]:
            self.SH = self._grown(self.SH, (self.SH.shape[0], self.nsamp * 2))
        self.SH[: self.n, self.nsamp] = self.H[: self.n] @ xi
        self.nsamp += 1

    def add(self, a, pt, ph, samples):
        key = np.round(ph, 9).tobytes() + np.round(pt, 9).tobytes()
        if key in self.keys:
            return False
        if self.n == self.cap:
            slot = self.order.pop(0)        # FIFO eviction
            for k, v in list(self.keys.items()):
                if v == slot:
                    del self.keys[k]
        else:
            if self.n == self.a.shape[0]:
                self._grow_rows()
            slot = self.n
            self.n += 1
        self.a[slot] = a
        self.T[slot] = pt
        self.H[slot] = ph
        self.SH[slot, : self.nsamp] = samples[: self.nsamp] @ ph
        self.keys[key] = slot
        self.order.append(slot)
        return True

    def cut_at(self, x):
        """Sum-form cut selected at x over all samples: (ssum, wsum, mean value)."""
        k, n = self.nsamp, self.n
        scores = (self.a[:n] + self.T[:n] @ x)[:, None] + self.SH[:n, :k]
        sel = np.argmax(scores, axis=0)
        best = scores[sel, np.arange(k)]
        wsum = self.T[sel].sum(axis=0)
        ssum = float(best.sum() - wsum @ x)
        return ssum, wsum, best


def _minorant(recourse, q, pi, rhs):
    """Affine-in-(x, xi) lower bound on Q from an optimal dual at one rhs."""
    a = q - float(pi @ rhs) + float(pi @ recourse.lp.b)
    return a, recourse.T.T @ pi, recourse.H.T @ pi


def solve_sd(problem, rng, min_samples=256, max_samples=2048, confidence=0.95,
             gap_tol=2e-3, r0=1.0, pool_cap=5000, rebuild_every=128,
             keep_cuts=64, check_every=16, inc_refresh=8, options=None):
    """Regularized stochastic decomposition for LP-in-both-stages problems.

    One fresh sample per iteration; exact recourse solves at the candidate and
    the incumbent feed the dual-vertex pool; pool argmax forms one candidate
    cut per iteration (plus a periodic incumbent cut); earlier cuts are
    rescaled k'/k through the shared eta column.  The master is the first
    stage plus eta over a box of radius r0/sigma around the incumbent; sigma
    halves on improving steps (floor 1e-4) and doubles on null steps.
    Requires recourse cost >= 0 and an LP first stage.

    Stops once samples >= min_samples when the incumbent estimate is stable
    over a trailing window and the model gap is within noise (bootstrap SE)
    plus gap_tol, or at max_samples.
    """
    if problem.integer_cols.size:
        raise ModelError("solve_sd requires an LP first stage")
    fs, rt = problem.first_stage, problem.recourse
    n1, kxi = fs.n, rt.H.shape[1]
    eta = n1                                   # epigraph column index

    def build_master():
        A = sparse.hstack([fs.A, sparse.csc_matrix((fs.m, 1))], format="csc")
        return LinearProgram(np.concatenate([fs.c, [1.0]]), A, fs.senses, fs.b,
                             np.concatenate([fs.lo, [0.0]]),
                             np.concatenate([fs.up, [_INF]]))

    master = build_master()
    eng = make_engine(master, options)
    if eng.solve() != "optimal":
        raise ModelError("first-stage LP is infeasible or unbounded")
    xhat = eng.full_x()[:n1].copy()
    x_cand = xhat.copy()
    model_val = eng.objective()

    oracle = RecourseOracle(rt, options)
    pool = _Pool(n1, kxi, pool_cap)
    samples = np.empty((256, kxi))
    cuts: list[dict] = []
    sigma = 1.0
    f_inc = np.inf
    q_inc = np.zeros(0)
    log: list[dict] = []
    stopped = "max_samples"
    zcrit = stats.norm.ppf(0.5 + confidence / 2.0)
    stable_since = 0

    def set_box():
        delta = r0 / sigma
        for j in range(n1):
            lo = max(fs.lo[j], xhat[j] - delta)
            up = min(fs.up[j], xhat[j] + delta)
            eng.set_bounds(j, lo, max(up, lo))  # guard rounding at the edges

    def add_cut_row(ssum, wsum, k, born):
        nz = np.nonzero(wsum)[0]
        row = eng.m
        eng.add_row(list(nz) + [eta], list(wsum[nz]) + [-float(k)], "<=", -ssum)
        cuts.append({"wsum": wsum.copy(), "ssum": ssum, "born": born,
                     "row": row, "last_active": born})

    def bump_eta(k):
        rows = [c["row"] for c in cuts if c["row"] >= 0]
        if rows:
            eng.update_column(eta, np.asarray(rows, dtype=np.int64),
                              np.full(len(rows), -float(k)))

    def rebuild(k):
        nonlocal eng
        keep = [c for c in cuts if c["row"] >= 0]
        keep.sort(key=lambda c: (c["last_active"], c["born"]), reverse=True)
        keep = keep[:keep_cuts]
        for c in cuts:
            c["row"] = -1
        base = build_master()
        rows = [sparse.csc_matrix(
                    (np.append(c["wsum"][np.nonzero(c["wsum"])[0]], -float(k)),
                     (np.zeros(np.count_nonzero(c["wsum"]) + 1, dtype=np.int64),
                      np.append(np.nonzero(c["wsum"])[0], eta))),
                    shape=(1, n1 + 1)) for c in keep]
        A = sparse.vstack([base.A] + rows, format="csc") if rows else base.A
        b = np.concatenate([base.b, [-c["ssum"] for c in keep]])
        senses = np.concatenate([base.senses,
                                 np.full(len(keep), LE, dtype=np.int8)])
        eng = make_engine(LinearProgram(base.c, A, senses, b, base.lo, base.up),
                          options)
        for i, c in enumerate(keep):
            c["row"] = fs.m + i

    for k in range(1, max_samples + 1):
        xi = problem.draw(rng, 1)[0]
        if k > samples.shape[0]:
            samples = np.vstack([samples, np.empty_like(samples)])
        samples[k - 1] = xi
        pool.add_sample(xi)

        rhs_c = rt.rhs(x_cand, xi)
        q, pi = oracle.solve_rhs(rhs_c, context=f" at sample {k}")
        pool.add(*_minorant(rt, q, pi, rhs_c), samples)
        if not np.array_equal(x_cand, xhat):
            rhs_i = rt.rhs(xhat, xi)
            q, pi = oracle.solve_rhs(rhs_i, context=f" at sample {k}")
            pool.add(*_minorant(rt, q, pi, rhs_i), samples)

        s_c, w_c, best_c = pool.cut_at(x_cand)
        s_i, w_i, q_inc = pool.cut_at(xhat)
        f_cand = float(fs.c @ x_cand) + best_c.mean()
        f_inc = float(fs.c @ xhat) + q_inc.mean()

        accepted = False
        predicted = f_inc - model_val
        if k > 1 and predicted > 1e-10 * (1.0 + abs(f_inc)):
            if f_inc - f_cand >= 0.2 * predicted:
                xhat = x_cand.copy()
                f_inc, q_inc = f_cand, best_c
                s_i, w_i = s_c, w_c
                sigma = max(sigma / 2.0, 1e-4)
                accepted = True
            else:
                sigma = min(sigma * 2.0, 1e8)

        bump_eta(k)
        add_cut_row(s_c, w_c, k, born=k)
        if not accepted and k % inc_refresh == 0:
            add_cut_row(s_i, w_i, k, born=k)  # accepted steps already cut at xhat
        if k % rebuild_every == 0:
            rebuild(k)

        set_box()
        if eng.solve() != "optimal":
            raise ModelError("SD master solve failed")
        duals = eng.duals()
        for c in cuts:
            if c["row"] >= 0 and abs(duals[c["row"]]) > 1e-9:
                c["last_active"] = k
        x_cand = eng.full_x()[:n1].copy()
        model_val = eng.objective()

        log.append({"iter": k, "incumbent_estimate": f_inc,
                    "candidate_estimate": f_cand, "model": model_val,
                    "sigma": sigma, "accepted": accepted, "pool": pool.n,
                    "rows": eng.m})

        if k >= min_samples and k % check_every == 0:
            gap = f_inc - model_val
            boot = rng.choice(q_inc, size=(200, q_inc.size), replace=True)
            se = float(boot.mean(axis=1).std())
            w = min(len(log), max(32, k // 4))
            v = np.array([r["incumbent_estimate"] for r in log[-w:]])
            drift = abs(v[: w // 2].mean() - v[w // 2:].mean())
            scale = 1.0 + abs(f_inc)
            if drift <= gap_tol * scale and gap <= gap_tol * scale + zcrit * se:
                stable_since += 1
                if stable_since >= 2:   # two consecutive passing checks
                    stopped = "stationary"
                    break
            else:
                stable_since = 0

    state = SdState(xhat.copy(), f_inc, pool.a[: pool.n].copy(),
                    pool.T[: pool.n].copy(), pool.H[: pool.n].copy(),
                    cuts, sigma, len(log), min(k, max_samples))
    return SdResult(xhat.copy(), f_inc, f_inc - float(fs.c @ xhat),
                    model_val, state.samples, stopped, state, log,
                    samples[: state.samples].copy())


# ------------------------------------------------------- statistical validation

@dataclass
class ValidationReport:
    passed: bool
    objective_mean: float         # candidate cost on the fresh evaluation sample
    objective_se: float
    ci: tuple                     # two-sided CI on the candidate objective
    gap_mean: float               # paired batch gap estimate (>= 0 up to LP tol)
    gap_se: float
    gap_upper: float              # one-sided upper confidence limit on the gap
    tolerance: float
    n_eval: int
    confidence: float


def validate_statistical_optimality(problem, candidate, n_eval=1000,
                                    confidence=0.95, tolerance=None,
                                    saa_reps=8, saa_batch=32, rng=None,
                                    options=None):
    """Fresh-sample optimality check for a first-stage candidate.

    Objective side: candidate cost on n_eval new samples (mean +- CI).  Gap
    side: saa_reps independent batches; on each, the candidate's batch cost
    minus the batch problem's optimum is a nonnegative paired gap estimate
    (common samples cancel the evaluation noise).  Passes when the one-sided
    upper confidence limit of the mean gap is within tolerance (default 2%
    of 1 + |objective|).  Zero-variance recourse gives exact decisions.
    """
    rng = rng or np.random.default_rng(12345)
    x = np.asarray(candidate, dtype=np.float64)
    rt = problem.recourse
    oracle = RecourseOracle(rt, options)
    fs_cost = float(problem.first_stage.c @ x)
    base = rt.lp.b + rt.T @ x

    def batch_cost(points):
        hxi = rt.H @ points.T
        vals = np.empty(points.shape[0])
        for i in range(points.shape[0]):
            vals[i], _ = oracle.solve_rhs(base + hxi[:, i],
                                          context=" during validation")
        return vals

    q = batch_cost(problem.draw(rng, n_eval))
    mean_u = fs_cost + float(q.mean())
    se_u = float(q.std(ddof=1) / np.sqrt(n_eval)) if n_eval > 1 else 0.0
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    ci = (mean_u - z * se_u, mean_u + z * se_u)

    gaps = np.empty(saa_reps)
    for r in range(saa_reps):
        points = problem.draw(rng, saa_batch)
        batch = ScenarioSet(points, np.full(saa_batch, 1.0 / saa_batch))
        sol, _ = solve_extensive(problem, batch, options=options)
        if sol.status != "optimal":
            raise ModelError(f"lower-bound batch problem {sol.status}")
        gaps[r] = fs_cost + float(batch_cost(points).mean()) - sol.objective
    gap_mean = float(gaps.mean())
    gap_se = float(gaps.std(ddof=1) / np.sqrt(saa_reps)) if saa_reps > 1 else 0.0
    tcrit = float(stats.t.ppf(confidence, saa_reps - 1)) if saa_reps > 1 else z
    gap_upper = gap_mean + tcrit * gap_se
    tol = tolerance if tolerance is not None else 0.02 * (1.0 + abs(mean_u))
    return ValidationReport(bool(gap_upper <= tol), mean_u, se_u, ci,
                            gap_mean, gap_se, gap_upper, tol, n_eval, confidence)
