"""Planning-model builders: DA-UC, ST-UC, and HA-ED instances.

Each builder turns a validated case plus window inputs (demand, renewable
availability, upstream plans, boundary conditions) into a concrete model:
a mixed-integer program for deterministic unit commitment, a linear program
for deterministic dispatch, or a two-stage problem when given scenarios.

Shared structure, one source of truth:

* commitment stage: on/start/stop binaries linked by the state equation,
  with minimum up/down windows folded against pre-window history;
* dispatch stage: consumed generation ``gen`` and excess ``exc`` per unit
  (excess is over-generation for conventional units, curtailment for
  renewables), line flows, bus angles, and unmet demand ``shed``; rows for
  capacity, ramping, flow balance (with per-bus reserve added to load),
  DC flow, renewable availability, and deviation tubes around upstream
  generation targets.

Commitment in the dispatch rows is pluggable: a variable in the same
matrix (deterministic UC), a column of the first stage (stochastic UC
recourse), or a fixed constant (downstream layers).  This is what keeps
the deterministic build and the one-scenario stochastic build identical
in substance.

Ramp limits, minimum up/down times, and deviation half-widths apply per
decision period at face value; money scales with period length (variable,
penalty, and no-load costs are per-hour rates, startup is per event).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import InputError, ModelError
from .lp import EQ, GE, LE, LpBuilder
from .mip import MixedIntegerProgram
from .stochastic import RecourseOracle, RecourseTemplate, ScenarioSet, TwoStageProblem


def da_units(case):
    return [g for g in case.generators if g.kind == "conventional_DA"]


def st_units(case):
    return [g for g in case.generators if g.kind == "conventional_ST"]


def conventional_units(case):
    return [g for g in case.generators if g.is_conventional]


def renewable_units(case):
    return [g for g in case.generators if g.is_renewable]


@dataclass(frozen=True)
class UnitBoundary:
    """Pre-window state of one unit, in the layer's own periods."""
    x0: int = 0                      # committed just before the window
    streak: int = 1                  # consecutive periods in state x0
    g0: float = 0.0                  # generation just before the window


def default_boundaries(units, startable=True):
    """All off; streak long enough that units may start immediately."""
    return {g.id: UnitBoundary(0, g.min_down if startable else 1, 0.0)
            for g in units}


@dataclass
class BuiltModel:
    layer: str                       # DA | ST | RT
    form: str                        # mip | lp | two_stage
    n_periods: int
    period_hours: float
    case: object
    committing: tuple                # ids committed by this model
    conv_ids: tuple                  # conventional units in the model
    renewable_ids: tuple
    mip: MixedIntegerProgram | None = None
    lp: object = None
    problem: TwoStageProblem | None = None
    index: dict | None = None        # key -> column (single-matrix forms)
    first_index: dict | None = None  # key -> first-stage column
    recourse_index: dict | None = None
    xi_dim: int = 0
    demand: np.ndarray | None = None
    reserve: np.ndarray | None = None

    @property
    def matrix_lp(self):
        """The single-matrix program, when this is not two-stage."""
        return self.mip.lp if self.mip is not None else self.lp


def _as_scenarios(supply, n_periods, n_renew, label):
    """Normalize availability input: (T,R) array or (paths, probs)."""
    if supply is None:
        raise InputError(f"missing renewable availability for {label}")
    if hasattr(supply, "paths") and hasattr(supply, "probabilities"):
        paths, probs = supply.paths, supply.probabilities
    elif isinstance(supply, tuple) and len(supply) == 2:
        paths, probs = supply
    else:
        arr = np.asarray(supply, dtype=np.float64)
        if arr.shape != (n_periods, n_renew):
            raise InputError(f"{label}: availability must be "
                             f"({n_periods}, {n_renew}), got {arr.shape}")
        return arr, None, None
    paths = np.asarray(paths, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if paths.ndim != 3 or paths.shape[1:] != (n_periods, n_renew):
        raise InputError(f"{label}: scenario paths must be "
                         f"(S, {n_periods}, {n_renew}), got {paths.shape}")
    return None, paths, probs


def _check_demand(demand, n_periods, n_buses, label):
    d = np.asarray(demand, dtype=np.float64)
    if d.shape != (n_periods, n_buses):
        raise InputError(f"{label}: demand must be ({n_periods}, {n_buses}),"
                         f" got {d.shape}")
    if (d < 0).any():
        raise InputError(f"{label}: negative demand")
    return d


def _reserve_matrix(case, layer, demand):
    frac = case.reserve.uc_fraction if layer in ("DA", "ST") \
        else case.reserve.ed_fraction
    return frac * demand


def _window(n_periods, full):
    if n_periods is None:
        return full
    n = int(n_periods)
    if not 1 <= n <= full:
        raise InputError(f"window of {n} periods outside 1..{full}")
    return n


class _Couplings:
    """Collects (row, col) entries for the stage-linking T and H matrices."""

    def __init__(self):
        self.t_entries = []          # (recourse_row, first_stage_col, coef)
        self.h_entries = []          # (recourse_row, xi_index, coef)

    def matrices(self, m, n_first, xi_dim):
        def build(entries, ncols):
            if not entries:
                return sparse.csc_matrix((m, ncols))
            r, c, v = zip(*entries)
            return sparse.csc_matrix(
                sparse.coo_matrix((v, (r, c)), shape=(m, ncols)))
        return build(self.t_entries, n_first), build(self.h_entries, xi_dim)


def _commitment_stage(bld, units, n_periods, hours, boundaries):
    """on/start/stop binaries with state, min-up, and min-down rows."""
    for g in units:
        bnd = boundaries.get(g.id)
        if bnd is None:
            raise InputError(f"no boundary state for unit {g.id!r}")
        for t in range(1, n_periods + 1):
            bld.var(("on", g.id, t), 0.0, 1.0,
                    obj=g.cost_noload * hours, integer=True)
            bld.var(("start", g.id, t), 0.0, 1.0,
                    obj=g.cost_startup, integer=True)
            bld.var(("stop", g.id, t), 0.0, 1.0, obj=0.0, integer=True)
        for t in range(1, n_periods + 1):
            link = {("on", g.id, t): 1.0, ("start", g.id, t): -1.0,
                    ("stop", g.id, t): 1.0}
            if t == 1:
                bld.row("commit_link", link, EQ, float(bnd.x0),
                        name=f"link[{g.id},1]")
            else:
                link[("on", g.id, t - 1)] = -1.0
                bld.row("commit_link", link, EQ, 0.0,
                        name=f"link[{g.id},{t}]")

            up = {("start", g.id, j): 1.0
                  for j in range(max(1, t - g.min_up + 1), t + 1)}
            up[("on", g.id, t)] = -1.0
            # a pre-window start still inside the window forces on
            hist_start = bnd.x0 == 1 and t <= g.min_up - bnd.streak
            bld.row("min_up", up, LE, -1.0 if hist_start else 0.0,
                    name=f"min_up[{g.id},{t}]")

            dn = {("stop", g.id, j): 1.0
                  for j in range(max(1, t - g.min_down + 1), t + 1)}
            dn[("on", g.id, t)] = 1.0
            hist_stop = bnd.x0 == 0 and t <= g.min_down - bnd.streak
            bld.row("min_down", dn, LE, 0.0 if hist_stop else 1.0,
                    name=f"min_down[{g.id},{t}]")


def _dispatch_stage(bld, case, layer, periods, hours, demand, reserve,
                    conv_specs, renew_specs, couplings):
    """Dispatch variables and rows (capacity, ramp, balance, DC flow,
    availability, deviation tubes) for the given absolute periods.

    conv_specs: list of (gen, commit, ramp_prev, tube) where commit is
      ("var",), ("const", x array over periods), or ("first", cols);
      ramp_prev is ("const", g0) or ("first", [(col, coef), ...]) or None;
      tube is None or (targets over periods, eps_up, eps_dn).
    renew_specs: list of (gen, xi) with xi ("const", values over periods)
      or ("stoch", xi index per period).
    """
    pen = case.penalties
    for k, t in enumerate(periods):
        for g, _, _, _ in conv_specs:
            bld.var(("gen", g.id, t), 0.0, np.inf,
                    obj=g.cost_variable * hours)
            bld.var(("exc", g.id, t), 0.0, np.inf, obj=pen.phi_over * hours)
        for g, _ in renew_specs:
            bld.var(("gen", g.id, t), 0.0, np.inf,
                    obj=g.cost_variable * hours)
            bld.var(("exc", g.id, t), 0.0, np.inf,
                    obj=pen.phi_curtail * hours)
        for ln in case.lines:
            bld.var(("flow", ln.id, t), ln.flow_min, ln.flow_max)
        for b in case.buses:
            bld.var(("angle", b.id, t), b.theta_min, b.theta_max)
            bld.var(("shed", b.id, t), 0.0, np.inf, obj=pen.phi_unmet * hours)

    for g, commit, ramp_prev, tube in conv_specs:
        for k, t in enumerate(periods):
            total = {("gen", g.id, t): 1.0, ("exc", g.id, t): 1.0}
            if commit[0] == "var":
                hi = dict(total)
                hi[("on", g.id, t)] = -g.g_max
                bld.row("capacity_hi", hi, LE, 0.0,
                        name=f"cap_hi[{g.id},{t}]")
                lo = dict(total)
                lo[("on", g.id, t)] = -g.g_min
                bld.row("capacity_lo", lo, GE, 0.0,
                        name=f"cap_lo[{g.id},{t}]")
            elif commit[0] == "const":
                x = float(commit[1][k])
                bld.row("capacity_hi", total, LE, g.g_max * x,
                        name=f"cap_hi[{g.id},{t}]")
                bld.row("capacity_lo", total, GE, g.g_min * x,
                        name=f"cap_lo[{g.id},{t}]")
            else:                    # first-stage commitment column
                col = int(commit[1][k])
                r = bld.row("capacity_hi", total, LE, 0.0,
                            name=f"cap_hi[{g.id},{t}]")
                couplings.t_entries.append((r, col, g.g_max))
                r = bld.row("capacity_lo", total, GE, 0.0,
                            name=f"cap_lo[{g.id},{t}]")
                couplings.t_entries.append((r, col, g.g_min))

            if k == 0:
                if ramp_prev is None:
                    pass             # no pre-window level: unconstrained t=1
                elif ramp_prev[0] == "const":
                    g0 = float(ramp_prev[1])
                    bld.row("ramp_up", total, LE, g.ramp_up + g0,
                            name=f"ramp_up[{g.id},{t}]")
                    down = {key: -v for key, v in total.items()}
                    bld.row("ramp_dn", down, LE, g.ramp_down - g0,
                            name=f"ramp_dn[{g.id},{t}]")
                else:
                    r = bld.row("ramp_up", total, LE, g.ramp_up,
                                name=f"ramp_up[{g.id},{t}]")
                    for col, coef in ramp_prev[1]:
                        couplings.t_entries.append((r, int(col), coef))
                    down = {key: -v for key, v in total.items()}
                    r = bld.row("ramp_dn", down, LE, g.ramp_down,
                                name=f"ramp_dn[{g.id},{t}]")
                    for col, coef in ramp_prev[1]:
                        couplings.t_entries.append((r, int(col), -coef))
            else:
                prev = periods[k - 1]
                up = dict(total)
                up[("gen", g.id, prev)] = -1.0
                up[("exc", g.id, prev)] = -1.0
                bld.row("ramp_up", up, LE, g.ramp_up,
                        name=f"ramp_up[{g.id},{t}]")
                dn = {key: -v for key, v in up.items()}
                bld.row("ramp_dn", dn, LE, g.ramp_down,
                        name=f"ramp_dn[{g.id},{t}]")

            if tube is not None:
                targets, eps_up, eps_dn = tube
                y = float(targets[k])
                bld.row("dev_hi", total, LE, y + eps_up,
                        name=f"dev_hi[{g.id},{t}]")
                bld.row("dev_lo", total, GE, y - eps_dn,
                        name=f"dev_lo[{g.id},{t}]")

    for g, xi in renew_specs:
        for k, t in enumerate(periods):
            avail = {("gen", g.id, t): 1.0, ("exc", g.id, t): 1.0}
            if xi[0] == "const":
                bld.row("availability", avail, EQ, float(xi[1][k]),
                        name=f"avail[{g.id},{t}]")
            else:
                r = bld.row("availability", avail, EQ, 0.0,
                            name=f"avail[{g.id},{t}]")
                couplings.h_entries.append((r, int(xi[1][k]), 1.0))

    for ln in case.lines:
        B = ln.susceptance
        for t in periods:
            bld.row("dc_flow",
                    {("flow", ln.id, t): 1.0,
                     ("angle", ln.from_bus, t): -B,
                     ("angle", ln.to_bus, t): B},
                    EQ, 0.0, name=f"dc[{ln.id},{t}]")

    gens_at = {b.id: [] for b in case.buses}
    for g, _, _, _ in conv_specs:
        gens_at[g.bus].append(g.id)
    for g, _ in renew_specs:
        gens_at[g.bus].append(g.id)
    lines_in = {b.id: [] for b in case.buses}
    lines_out = {b.id: [] for b in case.buses}
    for ln in case.lines:
        lines_in[ln.to_bus].append(ln.id)
        lines_out[ln.from_bus].append(ln.id)
    for k, t in enumerate(periods):
        for j, b in enumerate(case.buses):
            coeffs = {("shed", b.id, t): 1.0}
            for lid in lines_in[b.id]:
                coeffs[("flow", lid, t)] = 1.0
            for lid in lines_out[b.id]:
                coeffs[("flow", lid, t)] = coeffs.get(("flow", lid, t), 0.0) - 1.0
            for gid in gens_at[b.id]:
                coeffs[("gen", gid, t)] = 1.0
            bld.row("balance", coeffs, EQ,
                    float(demand[k, j] + reserve[k, j]),
                    name=f"balance[{b.id},{t}]")


def _build_uc(case, layer, n_periods, hours, demand, supply, boundaries,
              fixed_units, fixed_commitments, fixed_targets):
    """Shared DA-UC / ST-UC construction.

    fixed_units carry constant commitments and deviation tubes around the
    upstream generation targets; the layer's own units get commitment
    variables.  Deterministic availability yields one MIP; scenario input
    yields a TwoStageProblem (commitment first stage, dispatch recourse).
    """
    own = da_units(case) if layer == "DA" else st_units(case)
    renew = renewable_units(case)
    n_buses = len(case.buses)
    demand = _check_demand(demand, n_periods, n_buses, f"{layer}-UC")
    det, paths, probs = _as_scenarios(supply, n_periods, len(renew),
                                      f"{layer}-UC")
    reserve = _reserve_matrix(case, layer, demand)
    if boundaries is None:
        boundaries = default_boundaries(own)
    periods = list(range(1, n_periods + 1))

    def fixed_specs():
        specs = []
        for i, g in enumerate(fixed_units):
            xs = fixed_commitments[:, i]
            ys = fixed_targets[:, i]
            bnd = boundaries.get(g.id, UnitBoundary())
            specs.append((g, ("const", xs), ("const", bnd.g0),
                          (ys, g.ramp_up, g.ramp_down)))
        return specs

    if det is not None:
        bld = LpBuilder()
        _commitment_stage(bld, own, n_periods, hours, boundaries)
        conv = [(g, ("var",), ("const", boundaries[g.id].g0), None)
                for g in own]
        conv += fixed_specs()
        renew_specs = [(g, ("const", det[:, i]))
                       for i, g in enumerate(renew)]
        _dispatch_stage(bld, case, layer, periods, hours, demand, reserve,
                        conv, renew_specs, _Couplings())
        lp, index, ints = bld.build()
        return BuiltModel(layer=layer, form="mip", n_periods=n_periods,
                          period_hours=hours, case=case,
                          committing=tuple(g.id for g in own),
                          conv_ids=tuple(g.id for g in own)
                          + tuple(g.id for g in fixed_units),
                          renewable_ids=tuple(g.id for g in renew),
                          mip=MixedIntegerProgram(lp, ints), index=index,
                          demand=demand, reserve=reserve)

    fs_bld = LpBuilder()
    _commitment_stage(fs_bld, own, n_periods, hours, boundaries)
    fs_lp, fs_index, fs_ints = fs_bld.build()

    rc_bld = LpBuilder()
    couplings = _Couplings()
    R = len(renew)
    conv = [(g, ("first", [fs_index[("on", g.id, t)] for t in periods]),
             ("const", boundaries[g.id].g0), None) for g in own]
    conv += fixed_specs()
    renew_specs = [(g, ("stoch", [(t - 1) * R + i for t in periods]))
                   for i, g in enumerate(renew)]
    _dispatch_stage(rc_bld, case, layer, periods, hours, demand, reserve,
                    conv, renew_specs, couplings)
    rc_lp, rc_index, _ = rc_bld.build()
    xi_dim = n_periods * R
    T, H = couplings.matrices(rc_lp.m, fs_lp.n, xi_dim)
    points = paths.reshape(paths.shape[0], xi_dim)
    problem = TwoStageProblem(
        first_stage=fs_lp,
        recourse=RecourseTemplate(rc_lp, T, H),
        integer_cols=fs_ints,
        scenarios=ScenarioSet(points, probs))
    return BuiltModel(layer=layer, form="two_stage", n_periods=n_periods,
                      period_hours=hours, case=case,
                      committing=tuple(g.id for g in own),
                      conv_ids=tuple(g.id for g in own)
                      + tuple(g.id for g in fixed_units),
                      renewable_ids=tuple(g.id for g in renew),
                      problem=problem, first_index=fs_index,
                      recourse_index=rc_index, xi_dim=xi_dim,
                      demand=demand, reserve=reserve)


def build_da_uc(case, demand, supply, boundaries=None):
    """Day-ahead unit commitment over the full DA horizon.

    demand: (periods, buses) MW forecast.  supply: (periods, renewables)
    forecast for the deterministic form, or scenario paths/probabilities
    for the two-stage form.  boundaries: per DA-unit pre-window state.
    """
    ts = case.timescales.da
    return _build_uc(case, "DA", ts.n_periods, ts.resolution / 60.0,
                     demand, supply, boundaries,
                     fixed_units=[],
                     fixed_commitments=np.zeros((ts.n_periods, 0)),
                     fixed_targets=np.zeros((ts.n_periods, 0)))


def build_st_uc(case, demand, supply, da_commitments, da_targets,
                boundaries=None, n_periods=None):
    """Short-term unit commitment for fast-start units.

    Day-ahead units enter with fixed commitments (expanded to this layer's
    resolution) and deviation tubes of one ramp step around their targets;
    decommitment is impossible by construction.  demand: (periods, buses)
    actuals.  da_commitments/da_targets: (periods, DA units).  n_periods
    shortens the window (a run's final instances clip at its end).
    """
    ts = case.timescales.st
    n = _window(n_periods, ts.n_periods)
    das = da_units(case)
    if da_commitments is None or da_targets is None:
        raise InputError("missing day-ahead plan for the short-term window")
    da_commitments = np.asarray(da_commitments, dtype=np.float64)
    da_targets = np.asarray(da_targets, dtype=np.float64)
    if da_commitments.shape != (n, len(das)) or \
            da_targets.shape != (n, len(das)):
        raise InputError(f"day-ahead plan must cover ({n}, {len(das)}) "
                         f"unit-periods")
    if boundaries is None:
        boundaries = default_boundaries(st_units(case))
        boundaries.update(default_boundaries(das))
    return _build_uc(case, "ST", n, ts.resolution / 60.0, demand, supply,
                     boundaries, fixed_units=das,
                     fixed_commitments=da_commitments,
                     fixed_targets=da_targets)


def build_ha_ed(case, demand, supply_first, supply_tail, commitments,
                targets, g_prev, stochastic=False, n_periods=None):
    """Hour-ahead economic dispatch over the RT horizon.

    All commitments are fixed upstream: commitments/targets are
    (periods, conventional units) with tubes of one ramp step around the
    targets.  supply_first: realized availability for epoch 1, one value
    per renewable.  supply_tail: (periods-1, renewables) forecast, or
    scenario paths for the stochastic form.  g_prev: generation just
    before the window, per conventional unit.  Deterministic form is a
    single LP; stochastic form splits epoch 1 (first stage) from the
    tail.  n_periods shortens the window (a run's final instances clip).
    """
    ts = case.timescales.rt
    n = _window(n_periods, ts.n_periods)
    hours = ts.resolution / 60.0
    conv = conventional_units(case)
    renew = renewable_units(case)
    n_buses = len(case.buses)
    if commitments is None or targets is None:
        raise InputError("missing upstream commitments for dispatch")
    commitments = np.asarray(commitments, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if commitments.shape != (n, len(conv)) or targets.shape != (n, len(conv)):
        raise InputError(f"upstream plan must cover ({n}, {len(conv)}) "
                         f"unit-periods")
    g_prev = np.asarray(g_prev, dtype=np.float64)
    if g_prev.shape != (len(conv),):
        raise InputError(f"g_prev must give one level per conventional unit")
    demand = _check_demand(demand, n, n_buses, "HA-ED")
    supply_first = np.asarray(supply_first, dtype=np.float64)
    if supply_first.shape != (len(renew),):
        raise InputError(f"supply_first must give one value per renewable")
    det_tail, paths, probs = _as_scenarios(supply_tail, n - 1, len(renew),
                                           "HA-ED tail")
    reserve = _reserve_matrix(case, "RT", demand)

    def conv_spec(i, g, periods, ramp_prev):
        rows = [t - 1 for t in periods]
        return (g, ("const", commitments[rows, i]), ramp_prev,
                (targets[rows, i], g.ramp_up, g.ramp_down))

    if not stochastic:
        if det_tail is None:
            raise InputError("stochastic tail passed to deterministic build")
        bld = LpBuilder()
        xi = np.vstack([supply_first[None, :], det_tail])
        conv_specs = [conv_spec(i, g, list(range(1, n + 1)),
                                ("const", g_prev[i]))
                      for i, g in enumerate(conv)]
        renew_specs = [(g, ("const", xi[:, i])) for i, g in enumerate(renew)]
        _dispatch_stage(bld, case, "RT", list(range(1, n + 1)), hours,
                        demand, reserve, conv_specs, renew_specs,
                        _Couplings())
        lp, index, _ = bld.build()
        return BuiltModel(layer="RT", form="lp", n_periods=n,
                          period_hours=hours, case=case, committing=(),
                          conv_ids=tuple(g.id for g in conv),
                          renewable_ids=tuple(g.id for g in renew),
                          lp=lp, index=index, demand=demand, reserve=reserve)

    if n == 1:
        raise InputError("single-period window has no tail to hedge; "
                         "use the deterministic form")
    if paths is None:
        # allow a deterministic tail in stochastic form: one scenario
        paths = det_tail[None, :, :]
        probs = np.array([1.0])
    fs_bld = LpBuilder()
    fs_specs = [conv_spec(i, g, [1], ("const", g_prev[i]))
                for i, g in enumerate(conv)]
    fs_renew = [(g, ("const", supply_first[i:i + 1]))
                for i, g in enumerate(renew)]
    _dispatch_stage(fs_bld, case, "RT", [1], hours, demand[:1],
                    reserve[:1], fs_specs, fs_renew, _Couplings())
    fs_lp, fs_index, _ = fs_bld.build()

    rc_bld = LpBuilder()
    couplings = _Couplings()
    R = len(renew)
    tail_periods = list(range(2, n + 1))
    rc_specs = [conv_spec(i, g, tail_periods,
                          ("first", [(fs_index[("gen", g.id, 1)], 1.0),
                                     (fs_index[("exc", g.id, 1)], 1.0)]))
                for i, g in enumerate(conv)]
    rc_renew = [(g, ("stoch", [(t - 2) * R + i for t in tail_periods]))
                for i, g in enumerate(renew)]
    _dispatch_stage(rc_bld, case, "RT", tail_periods, hours, demand[1:],
                    reserve[1:], rc_specs, rc_renew, couplings)
    rc_lp, rc_index, _ = rc_bld.build()
    xi_dim = (n - 1) * R
    T, H = couplings.matrices(rc_lp.m, fs_lp.n, xi_dim)
    problem = TwoStageProblem(
        first_stage=fs_lp,
        recourse=RecourseTemplate(rc_lp, T, H),
        scenarios=ScenarioSet(paths.reshape(paths.shape[0], xi_dim), probs))
    return BuiltModel(layer="RT", form="two_stage", n_periods=n,
                      period_hours=hours, case=case, committing=(),
                      conv_ids=tuple(g.id for g in conv),
                      renewable_ids=tuple(g.id for g in renew),
                      problem=problem, first_index=fs_index,
                      recourse_index=rc_index, xi_dim=xi_dim,
                      demand=demand, reserve=reserve)


@dataclass
class DispatchTable:
    """Solution values arranged per entity; periods are 1-based labels."""
    periods: tuple
    on: dict = field(default_factory=dict)        # gid -> (T,) 0/1
    start: dict = field(default_factory=dict)
    stop: dict = field(default_factory=dict)
    gen: dict = field(default_factory=dict)       # gid -> (T,) consumed MW
    exc: dict = field(default_factory=dict)       # gid -> (T,) excess MW
    total: dict = field(default_factory=dict)     # gid -> gen + exc
    flow: dict = field(default_factory=dict)      # line id -> (T,)
    angle: dict = field(default_factory=dict)     # bus id -> (T,)
    shed: dict = field(default_factory=dict)      # bus id -> (T,)


def _table_from(index, x, built, periods):
    tab = DispatchTable(periods=tuple(periods))
    def series(cls, ident):
        return np.array([x[index[(cls, ident, t)]] for t in periods])
    for gid in built.committing:
        if (("on", gid, periods[0]) in index):
            tab.on[gid] = np.rint(series("on", gid)).astype(np.int64)
            tab.start[gid] = np.rint(series("start", gid)).astype(np.int64)
            tab.stop[gid] = np.rint(series("stop", gid)).astype(np.int64)
    for gid in built.conv_ids + built.renewable_ids:
        if ("gen", gid, periods[0]) in index:
            tab.gen[gid] = series("gen", gid)
            tab.exc[gid] = series("exc", gid)
            tab.total[gid] = tab.gen[gid] + tab.exc[gid]
    for ln in built.case.lines:
        if ("flow", ln.id, periods[0]) in index:
            tab.flow[ln.id] = series("flow", ln.id)
    for b in built.case.buses:
        if ("angle", b.id, periods[0]) in index:
            tab.angle[b.id] = series("angle", b.id)
            tab.shed[b.id] = series("shed", b.id)
    return tab


def dispatch_table(built, x):
    """Arrange a single-matrix solution vector by entity and period."""
    if built.form == "two_stage":
        raise ModelError("two-stage models need recourse_dispatch")
    return _table_from(built.index, x, built,
                       list(range(1, built.n_periods + 1)))


def first_stage_table(built, x_first):
    """Stochastic models: the decisions fixed before uncertainty."""
    if built.form != "two_stage":
        raise ModelError("not a two-stage model")
    if built.layer in ("DA", "ST"):
        periods = list(range(1, built.n_periods + 1))
        tab = DispatchTable(periods=tuple(periods))
        for gid in built.committing:
            tab.on[gid] = np.rint([x_first[built.first_index[("on", gid, t)]]
                                   for t in periods]).astype(np.int64)
            tab.start[gid] = np.rint(
                [x_first[built.first_index[("start", gid, t)]]
                 for t in periods]).astype(np.int64)
            tab.stop[gid] = np.rint(
                [x_first[built.first_index[("stop", gid, t)]]
                 for t in periods]).astype(np.int64)
        return tab
    return _table_from(built.first_index, x_first, built, [1])


def recourse_dispatch(built, x_first, xi, options=None):
    """Solve the recourse at one realization and arrange the dispatch."""
    if built.form != "two_stage":
        raise ModelError("not a two-stage model")
    oracle = RecourseOracle(built.problem.recourse, options)
    objective, _ = oracle.solve(np.asarray(x_first, dtype=np.float64),
                                np.asarray(xi, dtype=np.float64),
                                context=" in recourse dispatch")
    x = oracle.eng.full_x()[: built.problem.recourse.lp.n]
    start = 2 if built.layer == "RT" else 1
    tab = _table_from(built.recourse_index, x, built,
                      list(range(start, built.n_periods + 1)))
    return tab, objective


def verify_solution(built, x, atol=1e-7):
    """Max constraint violation by row kind, plus bound/integrality checks.

    Returns a dict kind -> violation; key "bounds" covers variable bounds
    and "integrality" the committed binaries.  All values should be ~0 for
    a solver-reported optimum.
    """
    lp = built.matrix_lp
    if lp is None:
        raise ModelError("verify_solution expects a single-matrix model")
    x = np.asarray(x, dtype=np.float64)
    res = lp.A @ x - lp.b
    out = {}
    for i in range(lp.m):
        kind = lp.row_kinds[i]
        if lp.senses[i] == LE:
            v = max(0.0, res[i])
        elif lp.senses[i] == GE:
            v = max(0.0, -res[i])
        else:
            v = abs(res[i])
        out[kind] = max(out.get(kind, 0.0), v)
    out["bounds"] = float(np.maximum(lp.lo - x, x - lp.up).max(initial=0.0))
    ints = built.mip.integer_cols if built.mip is not None else []
    out["integrality"] = float(max(
        (abs(x[j] - round(x[j])) for j in ints), default=0.0))
    return out


def dump_model(built, fp):
    """Readable model text: variables, bounds, rows keyed by row kind."""
    lp = built.matrix_lp
    if lp is not None:
        from .lp import write_lp_text
        write_lp_text(lp, fp)
        return
    from .lp import write_lp_text
    fp.write(f"two-stage {built.layer} model: first stage\n")
    write_lp_text(built.problem.first_stage, fp)
    fp.write(f"\nrecourse template (rhs varies with stage one and "
             f"availability)\n")
    write_lp_text(built.problem.recourse.lp, fp)
