"""Time-indexed demand and renewable supply series.

A frame is a uniformly sampled (time x site) matrix of nonnegative MW
values tagged as forecast or actual.  Frames are immutable and shareable;
every operation returns a new frame.  Resampling converts between the
planning resolutions: downsampling averages within each coarse bin,
upsampling runs a shape-preserving monotone cubic through the coarse
points so interpolated output never undershoots zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InputError

KINDS = ("forecast", "actual")


@dataclass(frozen=True)
class TimeSeriesFrame:
    start: np.datetime64
    resolution: int                  # minutes between rows
    columns: tuple
    values: np.ndarray               # (time, site), MW
    kind: str                        # forecast | actual

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise InputError("values must be a (time, site) matrix")
        object.__setattr__(self, "columns", tuple(self.columns))
        if vals.shape[1] != len(self.columns):
            raise InputError(f"{vals.shape[1]} value columns vs "
                             f"{len(self.columns)} column names")
        if self.kind not in KINDS:
            raise InputError(f"kind must be one of {KINDS}")
        if int(self.resolution) <= 0:
            raise InputError("resolution must be positive minutes")
        object.__setattr__(self, "resolution", int(self.resolution))
        object.__setattr__(self, "start", np.datetime64(self.start, "m"))
        if not np.isfinite(vals).all():
            t, s = np.argwhere(~np.isfinite(vals))[0]
            raise InputError(f"missing value at row {t}, column "
                             f"{self.columns[s]!r}")
        if (vals < 0).any():
            t, s = np.argwhere(vals < 0)[0]
            raise InputError(f"negative value at row {t}, column "
                             f"{self.columns[s]!r}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    def times(self):
        return self.start + np.arange(self.n_rows) * np.timedelta64(
            self.resolution, "m")

    def col(self, name):
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise InputError(f"unknown column {name!r}") from None

    def select(self, names):
        idx = [self.columns.index(n) if n in self.columns else
               self._missing(n) for n in names]
        return TimeSeriesFrame(self.start, self.resolution, tuple(names),
                               self.values[:, idx].copy(), self.kind)

    def _missing(self, name):
        raise InputError(f"unknown column {name!r}")

    def scaled(self, factor, columns=None):
        """New frame with the given columns (default all) multiplied."""
        vals = self.values.copy()
        if columns is None:
            vals *= factor
        else:
            for n in columns:
                if n not in self.columns:
                    self._missing(n)
                vals[:, self.columns.index(n)] *= factor
        return TimeSeriesFrame(self.start, self.resolution, self.columns,
                               vals, self.kind)

    def with_values(self, values):
        return TimeSeriesFrame(self.start, self.resolution, self.columns,
                               values, self.kind)


def resample(frame, target_resolution):
    """Convert a frame to a commensurate resolution.

    Downsampling (coarser target) takes the arithmetic mean of each group
    of fine rows; a single trailing row left over after full groups is
    kept as its own bin, so a grid that ends exactly on a coarse boundary
    keeps that endpoint.  Upsampling (finer target) interpolates through
    the rows with a monotone cubic, spans the same first-to-last interval
    inclusively, and clips at 0.
    """
    target = int(target_resolution)
    if target <= 0:
        raise InputError("target resolution must be positive minutes")
    res = frame.resolution
    if target == res:
        return frame
    if target % res == 0:
        k = target // res
        n = frame.n_rows
        if n % k not in (0, 1):
            raise InputError(f"cannot bin {n} rows at {res} min into "
                             f"{target}-min groups of {k}")
        nfull = n // k
        full = frame.values[:nfull * k].reshape(nfull, k, frame.n_cols)
        out = full.mean(axis=1)
        if n % k:
            out = np.vstack([out, frame.values[-1:]])
        return TimeSeriesFrame(frame.start, target, frame.columns, out,
                               frame.kind)
    if res % target == 0:
        n = frame.n_rows
        if n <= 1:
            return TimeSeriesFrame(frame.start, target, frame.columns,
                                   frame.values.copy(), frame.kind)
        coarse_t = np.arange(n) * float(res)
        fine_t = np.arange((n - 1) * (res // target) + 1) * float(target)
        spline = PchipInterpolator(coarse_t, frame.values, axis=0)
        out = np.clip(spline(fine_t), 0.0, None)
        return TimeSeriesFrame(frame.start, target, frame.columns, out,
                               frame.kind)
    raise InputError(f"resolutions {res} and {target} minutes are not "
                     f"commensurate")


def slice_horizon(frame, start_epoch, n_periods):
    """Rows [start_epoch, start_epoch + n_periods) as a new frame."""
    if n_periods < 0 or start_epoch < 0 or \
            start_epoch + n_periods > frame.n_rows:
        raise InputError(f"window [{start_epoch}, {start_epoch + n_periods})"
                         f" outside frame of {frame.n_rows} rows")
    start = frame.start + np.timedelta64(start_epoch * frame.resolution, "m")
    vals = frame.values[start_epoch:start_epoch + n_periods].copy()
    return TimeSeriesFrame(start, frame.resolution, frame.columns, vals,
                           frame.kind)


def write_frame(frame, path):
    """CSV with an ISO-8601 timestamp column followed by one column per site."""
    times = frame.times()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("timestamp",) + frame.columns)
        for i in range(frame.n_rows):
            w.writerow([str(times[i])] +
                       [repr(float(v)) for v in frame.values[i]])


def read_frame(path, kind, resolution=None):
    """Load a frame written by ``write_frame``; spacing must be uniform."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2 or rows[0][0] != "timestamp":
        raise InputError(f"{path}: expected a 'timestamp' header column")
    columns = tuple(rows[0][1:])
    body = [r for r in rows[1:] if r]
    try:
        times = np.array([np.datetime64(r[0], "m") for r in body])
    except ValueError as exc:
        raise InputError(f"{path}: bad timestamp ({exc})") from None
    vals = np.empty((len(body), len(columns)))
    for i, r in enumerate(body):
        if len(r) != len(columns) + 1:
            raise InputError(f"{path}: row {i + 1} has {len(r) - 1} values, "
                             f"expected {len(columns)}")
        for j, cell in enumerate(r[1:]):
            if not cell.strip():
                raise InputError(f"{path}: missing value at row {i + 1}, "
                                 f"column {columns[j]!r}")
            vals[i, j] = float(cell)
    if len(body) == 0:
        raise InputError(f"{path}: no data rows")
    if len(body) > 1:
        steps = np.diff(times).astype("timedelta64[m]").astype(int)
        if (steps != steps[0]).any() or steps[0] <= 0:
            raise InputError(f"{path}: timestamps are not uniformly spaced")
        inferred = int(steps[0])
        if resolution is not None and int(resolution) != inferred:
            raise InputError(f"{path}: spacing is {inferred} min, expected "
                             f"{resolution}")
        resolution = inferred
    elif resolution is None:
        raise InputError(f"{path}: cannot infer resolution from one row")
    return TimeSeriesFrame(times[0], int(resolution), columns, vals, kind)
