"""Estimators for ergodic, physical, mixing and attracting behaviour.

All verdicts are curves (SeriesRecord); ``verdict`` applies the threshold rule
(median of the last window below theta) on top.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import counterexample as cx
from .errors import DomainError
from .measure import (
    DensitySpec,
    ParticleMeasure,
    ProbeConfig,
    TestFunction,
    bl_distance,
    integrate,
    sample_density,
)
from .rng import generator
from .systems import SystemSpec, evolve, trajectory


@dataclass(frozen=True, eq=False)
class SeriesRecord:
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    stderr: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if t.shape != v.shape:
            raise ValueError("times and values differ in length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if self.stderr is not None:
            s = np.asarray(self.stderr, dtype=float).reshape(-1)
            if s.shape != t.shape:
                raise ValueError("stderr and times differ in length")
            object.__setattr__(self, "stderr", s)

    def __len__(self):
        return self.times.shape[0]


def write_series(rec: SeriesRecord, path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# label: {rec.label}\n")
        wr = csv.writer(fh, lineterminator="\n")
        if rec.stderr is None:
            wr.writerow(["t", "value"])
            for t, v in zip(rec.times.tolist(), rec.values.tolist()):
                wr.writerow([repr(t), repr(v)])
        else:
            wr.writerow(["t", "value", "stderr"])
            for t, v, s in zip(rec.times.tolist(), rec.values.tolist(), rec.stderr.tolist()):
                wr.writerow([repr(t), repr(v), repr(s)])


def read_series(path) -> SeriesRecord:
    label = ""
    rows = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("# label:"):
                label = line[len("# label:"):].strip()
            elif not line.startswith("#") and line.strip():
                rows.append(line.strip().split(","))
    header, body = rows[0], rows[1:]
    if header[:2] != ["t", "value"]:
        raise ValueError(f"{path}: not a series CSV")
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, len(header))
    stderr = data[:, 2] if len(header) > 2 else None
    return SeriesRecord(data[:, 0], data[:, 1], label, stderr)


def verdict(rec: SeriesRecord, theta: float = 0.05, window: float = 0.25) -> dict:
    """Threshold rule: converged iff the median of the last ``window`` fraction
    of the series lies below theta."""
    k = max(1, int(math.ceil(window * len(rec))))
    med = float(np.median(rec.values[-k:]))
    return {"label": rec.label, "final": float(rec.values[-1]), "window_median": med,
            "theta": theta, "converged": med < theta}


# --------------------------------------------------------------------------
# Birkhoff measures and basins


def birkhoff_times(sys: SystemSpec, T: float, burn_in: float = 0.0, n_samples: int = 10_007) -> np.ndarray:
    if not T > burn_in >= 0:
        raise ValueError("need T > burn_in >= 0")
    if sys.discrete:
        return np.arange(int(math.ceil(burn_in)), int(math.ceil(T)), dtype=float)
    return np.linspace(burn_in, T, n_samples)


def birkhoff_measure(sys: SystemSpec, x, T: float, burn_in: float = 0.0, n_samples: int = 10_007) -> ParticleMeasure:
    """Empirical measure of the orbit segment f^t x, t in [burn_in, T].

    Maps use every integer time in [burn_in, T); flows a uniform grid of
    ``n_samples`` times. Exact (Fraction) starting points stay exact until the
    particles are stored.
    """
    times = birkhoff_times(sys, T, burn_in, n_samples)
    if sys.discrete:
        pts = trajectory(sys, times, x)
    else:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        pts = evolve(sys, times, np.repeat(x, times.shape[0], axis=0))
    pts = np.asarray(pts, dtype=float).reshape(times.shape[0], sys.space.dim)
    return ParticleMeasure.uniform(pts, sys.space)


def basin_test(sys: SystemSpec, x, mu_ref: ParticleMeasure, T_grid, burn_in: float = 0.0,
               n_samples: int = 10_007, probe: ProbeConfig = ProbeConfig()) -> SeriesRecord:
    T_grid = np.asarray(T_grid, dtype=float)
    vals = [bl_distance(birkhoff_measure(sys, x, T, burn_in, n_samples), mu_ref, probe) for T in T_grid]
    return SeriesRecord(T_grid, vals, "basin")


def attracting_test(sys: SystemSpec, init: DensitySpec, mu_ref: ParticleMeasure, t_grid,
                    n_particles: int, seed: int, probe: ProbeConfig = ProbeConfig()) -> SeriesRecord:
    """t -> BL(f^t nu, mu_ref) for nu sampled from ``init``."""
    nu = sample_density(init, n_particles, seed)
    t_grid = np.asarray(t_grid, dtype=float)
    vals = []
    pts, now = nu.points, 0.0
    for t in t_grid:
        # maps advance incrementally; flows restart from the closed form
        if sys.discrete:
            pts = evolve(sys, t - now, pts)
            now = t
        else:
            pts = evolve(sys, t, nu.points)
        vals.append(bl_distance(ParticleMeasure(pts, nu.weights, sys.space), mu_ref, probe))
    return SeriesRecord(t_grid, vals, "attracting")


# --------------------------------------------------------------------------
# correlations


def _covariance(w: np.ndarray, a: np.ndarray, b: np.ndarray, b_mean: float | None = None):
    """Weighted covariance-type estimate and its influence-function stderr.

    With ``b_mean`` given, the second mean is a fixed reference value rather
    than estimated from the same ensemble.
    """
    ea = float(np.sum(w * a))
    if b_mean is None:
        eb = float(np.sum(w * b))
        infl = (a - ea) * (b - eb)
    else:
        eb = b_mean
        infl = a * (b - eb)
    val = float(np.sum(w * a * b)) - ea * eb
    n_eff = 1.0 / float(np.sum(w * w))
    var = float(np.sum(w * (infl - np.sum(w * infl)) ** 2))
    return val, math.sqrt(var / n_eff)


def classical_correlation(sys: SystemSpec, mu: ParticleMeasure, g1: TestFunction, g2: TestFunction,
                          t_grid) -> SeriesRecord:
    """t -> int g1 (g2 o f^t) dmu - int g1 dmu int g2 dmu on the ensemble."""
    t_grid = np.asarray(t_grid, dtype=float)
    a = g1(mu.points)
    e2 = integrate(mu, g2)
    vals, errs = [], []
    pts, now = mu.points, 0.0
    for t in t_grid:
        if sys.discrete:
            pts = evolve(sys, t - now, pts)
            now = t
        else:
            pts = evolve(sys, t, mu.points)
        val, se = _covariance(mu.weights, a, g2(pts), b_mean=e2)
        vals.append(val)
        errs.append(se)
    return SeriesRecord(t_grid, vals, "classical_correlation", np.array(errs))


def operational_correlation(sys: SystemSpec, U_density: DensitySpec, mu_ref: ParticleMeasure,
                            g1: TestFunction, g2: TestFunction, t_grid, n: int, seed: int) -> SeriesRecord:
    """t -> int_U g1 (g2 o f^t) dm - int_U g1 dm int g2 dmu_ref, with m|_U
    normalised and realised by n samples."""
    nu = sample_density(U_density, n, seed)
    t_grid = np.asarray(t_grid, dtype=float)
    a = g1(nu.points)
    ref = integrate(mu_ref, g2)
    vals, errs = [], []
    pts, now = nu.points, 0.0
    for t in t_grid:
        if sys.discrete:
            pts = evolve(sys, t - now, pts)
            now = t
        else:
            pts = evolve(sys, t, nu.points)
        val, se = _covariance(nu.weights, a, g2(pts), b_mean=ref)
        vals.append(val)
        errs.append(se)
    return SeriesRecord(t_grid, vals, "operational_correlation", np.array(errs))


# --------------------------------------------------------------------------
# orbit tracking


@dataclass(frozen=True, eq=False)
class OrbitTrackResult:
    partner: np.ndarray
    settle_time: float  # math.inf when no candidate tracks
    sup_distance: float
    candidates_tried: int
    grid: np.ndarray = field(repr=False, default=None)

    @property
    def tracked(self) -> bool:
        return math.isfinite(self.settle_time)


def _track_grid(sys: SystemSpec, T_max: float, dt: float | None) -> np.ndarray:
    if sys.discrete:
        return np.arange(int(T_max) + 1, dtype=float)
    dt = dt or min(0.05, T_max / 100)
    return np.linspace(0.0, T_max, int(math.ceil(T_max / dt)) + 1)


def _settle(d: np.ndarray, grid: np.ndarray, eps: float) -> tuple[float, float]:
    """Smallest grid time after which d stays below eps, and the sup on that tail."""
    bad = np.nonzero(d >= eps)[0]
    if bad.size == 0:
        return float(grid[0]), float(np.max(d))
    k = bad[-1] + 1
    if k >= d.shape[0]:
        return math.inf, float(np.max(d))
    return float(grid[k]), float(np.max(d[k:]))


def orbit_track_search(sys: SystemSpec, x, A_sampler: DensitySpec | None, eps: float, T_max: float,
                       n_candidates: int, seed: int, dt: float | None = None,
                       refine_steps: int = 40) -> OrbitTrackResult:
    """Find y in A whose orbit eps-tracks the orbit of x from some time on.

    Candidates: the system's analytic partner (if any), x itself when it lies on
    A, and ``n_candidates`` samples of A; the best one is refined by coordinate
    descent on the attractor parametrisation when the system provides one.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    grid = _track_grid(sys, T_max, dt)
    cands = []
    if sys.partner is not None:
        cands.append(np.asarray(sys.partner(x), dtype=float).reshape(1, -1))
    if sys.on_attractor is not None and bool(np.all(sys.on_attractor(x))):
        cands.append(x.reshape(1, -1))
    if A_sampler is not None and n_candidates > 0:
        cands.append(A_sampler.sample(generator(seed, 0x07), n_candidates))
    if not cands:
        raise ValueError("no orbit-tracking candidates")
    cands = np.concatenate(cands)
    tx = trajectory(sys, grid, x)  # (g, d)
    ty = trajectory(sys, grid, cands)  # (g, n, d)
    dist = sys.space.distance(ty, tx[:, None, :])  # (g, n)
    scores = [_settle(dist[:, i], grid, eps) for i in range(cands.shape[0])]
    best = min(range(len(scores)), key=lambda i: (scores[i][0], scores[i][1], i))
    best_y, (T, sup) = cands[best], scores[best]

    if sys.attractor_param is not None and refine_steps > 0 and sup > 0:
        dim = sys.params.get("dim_param", 1)
        param_of = sys.params.get("param_of", lambda y: y[:dim])
        u = np.asarray(param_of(best_y), dtype=float).reshape(-1)
        tail = grid >= 0.5 * grid[-1]

        def objective(u):
            y = np.asarray(sys.attractor_param(u), dtype=float).reshape(1, -1)
            d = sys.space.distance(trajectory(sys, grid[tail], y)[:, 0], tx[tail])
            return float(np.max(d))

        h, f0 = 0.05, objective(u)
        for _ in range(refine_steps):
            improved = False
            for k in range(dim):
                for sgn in (1.0, -1.0):
                    trial = u.copy()
                    trial[k] += sgn * h
                    f1 = objective(trial)
                    if f1 < f0:
                        u, f0, improved = trial, f1, True
            if not improved:
                h *= 0.5
        y = np.asarray(sys.attractor_param(u), dtype=float).reshape(-1)
        d = sys.space.distance(trajectory(sys, grid, y), tx)
        T2, sup2 = _settle(d, grid, eps)
        if (T2, sup2) < (T, sup):
            best_y, T, sup = y, T2, sup2
    return OrbitTrackResult(best_y, T, sup, int(cands.shape[0]), grid)


# --------------------------------------------------------------------------
# concentration of the counterexample's time averages


def concentration_profile(params: cx.CounterexampleParams, eps: float, T_grid, quadrature_n: int = 100_000,
                          x=None) -> SeriesRecord:
    """T -> 1 - p_T(ball of radius eps about the base point at time T), where p_T
    is the base marginal of the time-T average. Composite midpoint rule."""
    if params.y0 == 0.0:
        raise DomainError("concentration needs y0 != 0")
    base = params.base
    x = np.zeros(base.space.dim) if x is None else np.asarray(x, dtype=float).reshape(-1)
    y = np.full(quadrature_n, params.y0)
    vals = []
    for T in np.asarray(T_grid, dtype=float):
        s = (np.arange(quadrature_n) + 0.5) * (T / quadrature_n)
        _, psi = cx.fiber_clock(y, s)
        _, psi_T = cx.fiber_clock(np.array([params.y0]), np.array([T]))
        xs = base.flow(psi, np.repeat(x[None, :], quadrature_n, axis=0))
        xT = base.flow(psi_T, x[None, :])
        far = base.space.distance(xs, xT) >= eps
        vals.append(float(np.count_nonzero(far)) / quadrature_n)
    return SeriesRecord(np.asarray(T_grid, dtype=float), vals, "concentration_profile")


def concentration_bound_closed(c: float, eps_over_M: float, T) -> np.ndarray:
    """(1 + c/T)^a T^(a - 1) - c/T with a = exp(-eps/M), floored at 0 (when
    psi(T) < eps/M the excluded set is empty)."""
    T = np.asarray(T, dtype=float)
    a = math.exp(-eps_over_M)
    val = (1.0 + c / T) ** a * T ** (a - 1.0) - c / T
    out = np.maximum(val, 0.0)
    return float(out) if out.ndim == 0 else out


def concentration_bound(params: cx.CounterexampleParams, eps: float, T, M: float | None = None):
    if params.y0 == 0.0:
        raise DomainError("concentration needs y0 != 0")
    M = cx.field_bound(params.base) if M is None else M
    return concentration_bound_closed(params.c, eps / M, T)
