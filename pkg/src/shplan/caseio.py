"""Case and series loading: CSV tables tied together by a JSON manifest.

The manifest names the three network tables and the series directory and
carries the run settings (penalties, reserve policy, timescales, renewable
scaling).  All paths are resolved relative to the manifest file.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .grid import (
    Bus,
    Generator,
    GridCase,
    LayerTimescale,
    Line,
    PenaltyConfig,
    ReservePolicy,
    TimescaleConfig,
    validate_case,
)
from .timeseries import TimeSeriesFrame, read_frame

_BUS_FIELDS = {"id", "theta_min", "theta_max", "demand_ref"}
_LINE_FIELDS = {"from_bus", "to_bus", "susceptance", "flow_max", "flow_min"}
_GEN_FIELDS = {"id", "bus", "kind", "g_min", "g_max", "ramp_up", "ramp_down",
               "min_up", "min_down", "cost_startup", "cost_noload",
               "cost_variable", "heat_rate", "co2_rate", "nox_rate",
               "so2_rate", "supply_ref"}

SIGNALS = ("demand", "solar", "wind")


def _read_table(path, allowed, required):
    if not os.path.exists(path):
        raise InputError(f"missing case file {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in reader.fieldnames]
        unknown = set(header) - allowed
        if unknown:
            raise InputError(f"{path}: unknown columns {sorted(unknown)}")
        missing = required - set(header)
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for i, raw in enumerate(reader):
            rows.append({k.strip(): (v.strip() if v is not None else "")
                         for k, v in raw.items() if k is not None})
        return rows


def _num(row, key, path, default=None):
    cell = row.get(key, "")
    if cell == "":
        if default is None:
            raise InputError(f"{path}: missing value for {key!r} "
                             f"in row {row}")
        return default
    try:
        return float(cell)
    except ValueError:
        raise InputError(f"{path}: bad number {cell!r} for {key!r}") from None


def _load_buses(path):
    rows = _read_table(path, _BUS_FIELDS, {"id"})
    return tuple(
        Bus(id=r["id"],
            theta_min=_num(r, "theta_min", path, -0.6),
            theta_max=_num(r, "theta_max", path, 0.6),
            demand_ref=r.get("demand_ref") or None)
        for r in rows)


def _load_lines(path):
    rows = _read_table(path, _LINE_FIELDS,
                       {"from_bus", "to_bus", "susceptance", "flow_max"})
    out = []
    for r in rows:
        fmax = _num(r, "flow_max", path)
        out.append(Line(from_bus=r["from_bus"], to_bus=r["to_bus"],
                        susceptance=_num(r, "susceptance", path),
                        flow_max=fmax,
                        flow_min=_num(r, "flow_min", path, -fmax)))
    return tuple(out)


def _load_generators(path):
    rows = _read_table(path, _GEN_FIELDS, {"id", "bus", "kind"})
    out = []
    for r in rows:
        out.append(Generator(
            id=r["id"], bus=r["bus"], kind=r["kind"],
            g_min=_num(r, "g_min", path, 0.0),
            g_max=_num(r, "g_max", path, 0.0),
            ramp_up=_num(r, "ramp_up", path, 0.0),
            ramp_down=_num(r, "ramp_down", path, 0.0),
            min_up=int(_num(r, "min_up", path, 1)),
            min_down=int(_num(r, "min_down", path, 1)),
            cost_startup=_num(r, "cost_startup", path, 0.0),
            cost_noload=_num(r, "cost_noload", path, 0.0),
            cost_variable=_num(r, "cost_variable", path, 0.0),
            heat_rate=_num(r, "heat_rate", path, 0.0),
            co2_rate=_num(r, "co2_rate", path, 0.0),
            nox_rate=_num(r, "nox_rate", path, 0.0),
            so2_rate=_num(r, "so2_rate", path, 0.0),
            supply_ref=r.get("supply_ref") or None))
    return tuple(out)


def _timescales(spec):
    if spec is None:
        return TimescaleConfig()
    def layer(key, default):
        v = spec.get(key)
        return LayerTimescale(*(int(x) for x in v)) if v else default
    base = TimescaleConfig()
    return TimescaleConfig(da=layer("da", base.da), st=layer("st", base.st),
                           rt=layer("rt", base.rt))


def load_case(manifest_path, validate=True):
    """Build a GridCase from a JSON manifest; raises on invalid cases."""
    if not os.path.exists(manifest_path):
        raise InputError(f"missing case manifest {manifest_path}")
    with open(manifest_path) as fh:
        try:
            man = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{manifest_path}: bad JSON ({exc})") from None
    root = os.path.dirname(os.path.abspath(manifest_path))
    rel = lambda p: os.path.join(root, p)

    reserve = man.get("reserve", "very_low")
    if isinstance(reserve, str):
        policy = ReservePolicy.named(reserve)
    else:
        policy = ReservePolicy(float(reserve["uc_fraction"]),
                               float(reserve["ed_fraction"]))
    pen = man.get("penalties", {})
    case = GridCase(
        buses=_load_buses(rel(man.get("buses", "buses.csv"))),
        lines=_load_lines(rel(man.get("lines", "lines.csv"))),
        generators=_load_generators(rel(man.get("generators",
                                                "generators.csv"))),
        penalties=PenaltyConfig(
            phi_over=float(pen.get("phi_over", 25.0)),
            phi_curtail=float(pen.get("phi_curtail", 25.0)),
            phi_unmet=float(pen.get("phi_unmet", 5000.0))),
        reserve=policy,
        timescales=_timescales(man.get("timescales")),
        sw_multiplier=float(man.get("sw_multiplier", 1.0)))
    if validate:
        rep = validate_case(case)
        if not rep.ok:
            raise InputError(f"invalid case {manifest_path}: {rep}")
    return case


def series_dir(manifest_path):
    with open(manifest_path) as fh:
        man = json.load(fh)
    root = os.path.dirname(os.path.abspath(manifest_path))
    return os.path.join(root, man.get("series_dir", "series"))


@dataclass(frozen=True)
class SeriesBundle:
    """The six signal frames; renewable supply already sw-scaled."""
    demand_forecast: TimeSeriesFrame
    demand_actual: TimeSeriesFrame
    solar_forecast: TimeSeriesFrame | None
    solar_actual: TimeSeriesFrame | None
    wind_forecast: TimeSeriesFrame | None
    wind_actual: TimeSeriesFrame | None

    def frame(self, signal, kind):
        return getattr(self, f"{signal}_{kind}")

    def supply(self, kind):
        """Solar and wind columns merged into one frame."""
        frames = [f for f in (self.frame("solar", kind),
                              self.frame("wind", kind)) if f is not None]
        if not frames:
            raise InputError("case has no renewable series")
        if len(frames) == 1:
            return frames[0]
        a, b = frames
        if a.start != b.start or a.resolution != b.resolution or \
                a.n_rows != b.n_rows:
            raise InputError("solar and wind series are not aligned")
        return TimeSeriesFrame(a.start, a.resolution, a.columns + b.columns,
                               np.hstack([a.values, b.values]), kind)


def load_series(directory, sw_multiplier=1.0, require=("demand",)):
    """Load `<signal>_<kind>.csv` frames; scale solar/wind by sw_multiplier."""
    frames = {}
    for signal in SIGNALS:
        for kind in ("forecast", "actual"):
            path = os.path.join(directory, f"{signal}_{kind}.csv")
            if not os.path.exists(path):
                if signal in require:
                    raise InputError(f"missing series file {path}")
                frames[f"{signal}_{kind}"] = None
                continue
            fr = read_frame(path, kind)
            if signal != "demand" and sw_multiplier != 1.0:
                fr = fr.scaled(sw_multiplier)
            frames[f"{signal}_{kind}"] = fr
    return SeriesBundle(**frames)


def series_report(case, bundle, n_days=None):
    """Consistency of the series bundle against the case.

    With n_days, also checks the horizon: day-ahead planning for the final
    day needs rows through the end of that day at every resolution.
    """
    from .grid import ValidationReport
    rep = ValidationReport()

    for kind in ("forecast", "actual"):
        dem = bundle.frame("demand", kind)
        if dem is None:
            rep.add(f"missing demand {kind} series")
            continue
        for b in case.buses:
            if b.demand_ref and b.demand_ref not in dem.columns:
                rep.add(f"bus {b.id!r}: demand_ref {b.demand_ref!r} not in "
                        f"demand_{kind}.csv")
    for g in case.generators:
        if not g.is_renewable:
            continue
        for kind in ("forecast", "actual"):
            fr = bundle.frame(g.kind, kind)
            if fr is None:
                rep.add(f"generator {g.id!r}: no {g.kind} {kind} series")
            elif g.supply_ref not in fr.columns:
                rep.add(f"generator {g.id!r}: supply_ref {g.supply_ref!r} "
                        f"not in {g.kind}_{kind}.csv")

    for signal in SIGNALS:
        fc, ac = bundle.frame(signal, "forecast"), bundle.frame(signal, "actual")
        if fc is None or ac is None:
            if (fc is None) != (ac is None):
                rep.add(f"{signal}: forecast/actual pair incomplete")
            continue
        if fc.columns != ac.columns:
            rep.add(f"{signal}: forecast and actual columns differ")
        if fc.start != ac.start or fc.resolution != ac.resolution:
            rep.add(f"{signal}: forecast and actual grids differ")
        if fc.n_rows != ac.n_rows:
            rep.add(f"{signal}: forecast has {fc.n_rows} rows, actual "
                    f"{ac.n_rows}")

    if n_days is not None and bundle.demand_forecast is not None:
        res = bundle.demand_forecast.resolution
        need = n_days * 1440 // res
        for signal in SIGNALS:
            fr = bundle.frame(signal, "forecast")
            if fr is not None and fr.n_rows < need:
                rep.add(f"{signal} series too short: {fr.n_rows} rows at "
                        f"{fr.resolution} min < {need} needed for "
                        f"{n_days} day(s)")
    return rep
