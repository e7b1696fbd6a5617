"""Renewable-supply uncertainty: VAR fitting, path sampling, forecast updates.

Separate models are fit for the wind fleet and the solar fleet, each on a
trailing window of per-site max-normalized history.  Sampling draws
correlated noise, propagates mean-zero deviations through the fitted lag
recursion, adds them to the base forecast, and clips at 0.  As dispatch
time approaches, ``update_forecast`` pulls the forecast toward the last
observation with a fading weight schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ModelError
from .timeseries import TimeSeriesFrame

PSD_TOL = 1e-8
RIDGE = 1e-6


def _frozen(arr):
    a = np.ascontiguousarray(arr, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VarModel:
    order: int
    coefficients: tuple              # Phi_1..Phi_order, each (site, site)
    noise_mean: np.ndarray           # zeros
    noise_cov: np.ndarray            # residual covariance, normalized units
    normalization: np.ndarray        # per-site scale (historical max)
    columns: tuple
    resolution: int                  # minutes of the training series
    ridge: bool = False              # rank-deficient fit fell back to ridge

    def __post_init__(self):
        n = len(self.columns)
        if self.order < 1 or len(self.coefficients) != self.order:
            raise InputError("order must be >= 1 with one matrix per lag")
        coefs = tuple(_frozen(p) for p in self.coefficients)
        for p in coefs:
            if p.shape != (n, n):
                raise InputError(f"coefficient matrices must be {n}x{n}")
        cov = np.asarray(self.noise_cov, dtype=np.float64)
        if cov.shape != (n, n) or not np.allclose(cov, cov.T, atol=PSD_TOL):
            raise InputError("noise_cov must be a symmetric site x site matrix")
        w = np.linalg.eigvalsh((cov + cov.T) / 2.0)
        if w.min() < -PSD_TOL * max(1.0, w.max()):
            raise InputError("noise_cov is not positive semidefinite")
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "noise_mean", _frozen(np.zeros(n)))
        object.__setattr__(self, "noise_cov", _frozen((cov + cov.T) / 2.0))
        object.__setattr__(self, "normalization",
                           _frozen(self.normalization))
        object.__setattr__(self, "columns", tuple(self.columns))

    def to_json(self):
        return {
            "order": self.order,
            "coefficients": [p.tolist() for p in self.coefficients],
            "noise_cov": self.noise_cov.tolist(),
            "normalization": self.normalization.tolist(),
            "columns": list(self.columns),
            "resolution": self.resolution,
            "ridge": self.ridge,
        }

    @classmethod
    def from_json(cls, data):
        n = len(data["columns"])
        return cls(
            order=int(data["order"]),
            coefficients=tuple(np.array(p) for p in data["coefficients"]),
            noise_mean=np.zeros(n),
            noise_cov=np.array(data["noise_cov"]),
            normalization=np.array(data["normalization"]),
            columns=tuple(data["columns"]),
            resolution=int(data["resolution"]),
            ridge=bool(data["ridge"]),
        )


@dataclass(frozen=True)
class ScenarioPaths:
    paths: np.ndarray                # (scenario, time, site), MW
    probabilities: np.ndarray
    columns: tuple
    start: np.datetime64
    resolution: int

    def __post_init__(self):
        paths = np.asarray(self.paths, dtype=np.float64)
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if paths.ndim != 3 or paths.shape[0] != probs.shape[0]:
            raise InputError("paths must be (scenario, time, site) with one "
                             "probability per scenario")
        if abs(probs.sum() - 1.0) > 1e-9 or (probs < 0).any():
            raise InputError("probabilities must be a distribution")
        if (paths < 0).any():
            raise InputError("path values must be nonnegative")
        object.__setattr__(self, "paths", _frozen(paths))
        object.__setattr__(self, "probabilities", _frozen(probs))
        object.__setattr__(self, "columns", tuple(self.columns))

    def __len__(self):
        return self.paths.shape[0]

    @property
    def n_periods(self):
        return self.paths.shape[1]

    def path_frame(self, s):
        return TimeSeriesFrame(self.start, self.resolution, self.columns,
                               self.paths[s].copy(), "forecast")


@dataclass(frozen=True)
class UpdateSchedule:
    alphas: tuple                    # weight on the observed level at lead i

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        if any(x < 0 or x > 1 for x in a):
            raise InputError("alphas must lie in [0, 1]")
        if any(a[i] < a[i + 1] for i in range(len(a) - 1)):
            raise InputError("alphas must be nonincreasing")
        object.__setattr__(self, "alphas", a)

    def __len__(self):
        return len(self.alphas)

    def alpha(self, lead):
        # leads past the schedule carry no observation weight
        return self.alphas[lead - 1] if lead <= len(self.alphas) else 0.0

    @classmethod
    def default(cls, lookahead, fade=16):
        """Linear decay to zero over ``fade`` leads."""
        return cls(tuple(max(0.0, 1.0 - i / fade)
                         for i in range(1, lookahead + 1)))


def fit_var(history, max_lag=3):
    """Least-squares lag fit on per-site max-normalized history.

    The lag order minimizes AIC over a common estimation sample; the chosen
    order is then refit on the full usable sample.  A rank-deficient design
    falls back to a fixed small ridge and flags the model.
    """
    if max_lag < 1:
        raise InputError("max_lag must be >= 1")
    n = history.n_cols
    T = history.n_rows
    if T < 10 * max_lag * n:
        raise InputError(f"history of {T} rows is too short for {n} sites "
                         f"at max_lag {max_lag}; need {10 * max_lag * n}")
    scale = history.values.max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    Y = history.values / scale

    def design(m, first):
        # rows t = first..T-1; columns [1, y_{t-1}, ..., y_{t-m}]
        rows = T - first
        X = np.empty((rows, 1 + m * n))
        X[:, 0] = 1.0
        for j in range(1, m + 1):
            X[:, 1 + (j - 1) * n:1 + j * n] = Y[first - j:T - j]
        return X, Y[first:]

    def fit(m, first):
        X, tgt = design(m, first)
        B, _, rank, _ = np.linalg.lstsq(X, tgt, rcond=None)
        used_ridge = rank < X.shape[1]
        if used_ridge:
            G = X.T @ X + RIDGE * np.eye(X.shape[1])
            B = np.linalg.solve(G, X.T @ tgt)
        E = tgt - X @ B
        cov = E.T @ E / max(1, tgt.shape[0])
        return B, cov, used_ridge

    best_m, best_aic = 1, np.inf
    for m in range(1, max_lag + 1):
        _, cov, _ = fit(m, max_lag)
        sign, logdet = np.linalg.slogdet(cov)
        aic = (logdet if sign > 0 else -np.inf) \
            + 2.0 * (m * n * n + n) / (T - max_lag)
        if aic < best_aic:
            best_m, best_aic = m, aic

    B, cov, used_ridge = fit(best_m, best_m)
    phis = tuple(B[1 + j * n:1 + (j + 1) * n].T.copy()
                 for j in range(best_m))
    return VarModel(order=best_m, coefficients=phis,
                    noise_mean=np.zeros(n), noise_cov=(cov + cov.T) / 2.0,
                    normalization=scale, columns=history.columns,
                    resolution=history.resolution, ridge=used_ridge)


def _noise_factor(cov):
    w = np.linalg.eigvalsh(cov)
    if w.min() < -PSD_TOL * max(1.0, w.max()):
        raise ModelError("noise covariance is not positive semidefinite")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # semidefinite: fall back to the symmetric square root
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_paths(model, base_forecast, n_scenarios, seed):
    """Equally weighted sampled paths around a base forecast.

    Correlated noise is drawn per period, deviations follow the fitted lag
    recursion from zero initial state, and the denormalized result is added
    to the base and clipped at 0.  Deterministic for a fixed seed.
    """
    if n_scenarios < 1:
        raise InputError("n_scenarios must be >= 1")
    if base_forecast.columns != model.columns:
        raise InputError("base forecast columns do not match the model")
    if base_forecast.resolution != model.resolution:
        raise InputError(f"base forecast at {base_forecast.resolution} min "
                         f"but model trained at {model.resolution} min")
    L = _noise_factor(model.noise_cov)
    S, T, n = n_scenarios, base_forecast.n_rows, len(model.columns)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((S, T, n)) @ L.T
    dev = np.zeros((S, T, n))
    for t in range(T):
        acc = eps[:, t]
        for j, phi in enumerate(model.coefficients, start=1):
            if t - j >= 0:
                acc = acc + dev[:, t - j] @ phi.T
        dev[:, t] = acc
    paths = np.clip(base_forecast.values[None] + dev * model.normalization,
                    0.0, None)
    return ScenarioPaths(paths, np.full(S, 1.0 / S), model.columns,
                         base_forecast.start, base_forecast.resolution)


def update_forecast(da_forecast, last_actual, schedule, lookahead):
    """Pull near-term forecast rows toward the last observation.

    Row 0 is the anchor period whose actual ``last_actual`` was just
    observed.  Each row i in 1..lookahead moves by alpha_i times the
    anchor-period surprise (actual minus forecast); rows beyond the
    lookahead are returned unchanged.  With actual equal to the anchor
    forecast the output is identical to the input.
    """
    y = np.asarray(last_actual, dtype=np.float64).reshape(-1)
    if y.shape[0] != da_forecast.n_cols:
        raise InputError(f"last_actual has {y.shape[0]} sites, frame has "
                         f"{da_forecast.n_cols}")
    if lookahead < 0 or lookahead > da_forecast.n_rows - 1:
        raise InputError(f"lookahead {lookahead} exceeds the "
                         f"{da_forecast.n_rows}-row forecast")
    if lookahead > len(schedule):
        raise InputError(f"lookahead {lookahead} exceeds the "
                         f"{len(schedule)}-step schedule")
    out = da_forecast.values.copy()
    surprise = y - out[0]
    for i in range(1, lookahead + 1):
        out[i] = np.clip(out[i] + schedule.alpha(i) * surprise, 0.0, None)
    return da_forecast.with_values(out)
