"""Bowen-metric covers, coarse-graining and Bowen-ball measure ratios."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyBall, EmptyCandidates, Unassigned
from .measure import DensitySpec, ParticleMeasure, TestFunction, as_points, integrate
from .rng import generator
from .systems import BowenContext, SystemSpec, bowen_context, evolve, orbit_grid


def _pairwise_bowen(space, traj_a: np.ndarray, traj_b: np.ndarray) -> np.ndarray:
    """(n, m) Bowen distances from orbit arrays of shape (g, n, d) and (g, m, d)."""
    out = np.zeros((traj_a.shape[1], traj_b.shape[1]))
    for k in range(traj_a.shape[0]):
        np.maximum(out, space.distance(traj_a[k][:, None, :], traj_b[k][None, :, :]), out=out)
    return out


@dataclass(frozen=True, eq=False)
class CoverSpec:
    """Bi-separated centers with their delta-balls (M_i) and nearest-center
    cells (N_i). A point belongs to cell i when center i is its nearest center
    in d_tau (lowest index on ties) and lies within multiplier * delta."""

    ctx: BowenContext
    delta: float
    centers: np.ndarray
    candidates: np.ndarray
    multiplier: float = 3.0

    def __len__(self):
        return self.centers.shape[0]

    @property
    def space(self):
        return self.ctx.system.space

    def center_orbits(self) -> np.ndarray:
        cached = self.__dict__.get("_orbits")
        if cached is None:
            cached = orbit_grid(self.ctx, self.centers).reshape(self.ctx.grid.shape[0], len(self), -1)
            object.__setattr__(self, "_orbits", cached)
        return cached

    def distances(self, points, chunk: int = 4096) -> np.ndarray:
        """(n, k) Bowen distances from points to the centers."""
        pts = as_points(points, self.space)
        co = self.center_orbits()
        out = np.empty((pts.shape[0], len(self)))
        for s in range(0, pts.shape[0], chunk):
            tr = orbit_grid(self.ctx, pts[s:s + chunk]).reshape(co.shape[0], -1, pts.shape[1])
            out[s:s + chunk] = _pairwise_bowen(self.space, tr, co)
        return out

    def assign(self, points) -> np.ndarray:
        """Cell index per point, -1 when outside every multiplier*delta ball."""
        d = self.distances(points)
        idx = np.argmin(d, axis=1)  # first minimum: lowest index wins ties
        near = d[np.arange(d.shape[0]), idx]
        return np.where(near < self.multiplier * self.delta, idx, -1)

    def ball_index(self, points) -> np.ndarray:
        """Index of the delta-ball M_i containing each point, -1 if none. The
        balls are disjoint because the centers are 2 delta apart."""
        d = self.distances(points)
        idx = np.argmin(d, axis=1)
        return np.where(d[np.arange(d.shape[0]), idx] < self.delta, idx, -1)

    def in_ball(self, points, i: int) -> np.ndarray:
        """Membership in M_i, the open delta Bowen ball about center i."""
        pts = as_points(points, self.space)
        tr = orbit_grid(self.ctx, pts).reshape(self.ctx.grid.shape[0], pts.shape[0], -1)
        co = self.center_orbits()[:, i]
        d = np.max(self.space.distance(tr, co[:, None, :]), axis=0)
        return d < self.delta


def greedy_bisep(ctx: BowenContext, candidates, delta: float, multiplier: float = 3.0) -> CoverSpec:
    """Scan candidates in order, keeping a point iff its d_tau distance to every
    kept center is at least 2 delta. The result is maximal in the list."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    space = ctx.system.space
    cand = np.asarray(candidates, dtype=float)
    if cand.size == 0:
        raise EmptyCandidates("no candidate points")
    cand = as_points(cand, space)
    tr = orbit_grid(ctx, cand).reshape(ctx.grid.shape[0], cand.shape[0], -1)
    keep = []
    nearest = np.full(cand.shape[0], np.inf)
    for i in range(cand.shape[0]):
        if nearest[i] >= 2 * delta:
            keep.append(i)
            d = np.max(space.distance(tr[:, i:i + 1], tr), axis=0)
            np.minimum(nearest, d, out=nearest)
    return CoverSpec(ctx, float(delta), cand[keep], cand, float(multiplier))


# --------------------------------------------------------------------------
# coarse graining


def coarse_grain(nu: ParticleMeasure, mu: ParticleMeasure, cover: CoverSpec) -> ParticleMeasure:
    """sum_i nu(N_i) mu(. | M_i), as a reweighting of mu's particles."""
    cells = cover.assign(nu.points)
    if np.any(cells < 0):
        raise Unassigned(f"{int(np.sum(cells < 0))} particles lie outside every cell")
    cell_mass = np.bincount(cells, weights=nu.weights, minlength=len(cover))
    balls = cover.ball_index(mu.points)
    inb = balls >= 0
    ball_mass = np.bincount(balls[inb], weights=mu.weights[inb], minlength=len(cover))
    empty = np.nonzero((cell_mass > 0) & ~(ball_mass > 0))[0]
    if empty.size:
        raise EmptyBall(f"ball {int(empty[0])} carries no mass of the reference measure")
    out = np.zeros(len(mu))
    out[inb] = cell_mass[balls[inb]] * mu.weights[inb] / np.where(ball_mass > 0, ball_mass, 1.0)[balls[inb]]
    keep = out > 0
    return ParticleMeasure(mu.points[keep], out[keep], mu.space)


def density_ratio(nu: ParticleMeasure, mu: ParticleMeasure, cover: CoverSpec) -> float:
    """max_i nu(N_i) / mu(M_i) over occupied cells."""
    cells = cover.assign(nu.points)
    cell_mass = np.bincount(cells[cells >= 0], weights=nu.weights[cells >= 0], minlength=len(cover))
    balls = cover.ball_index(mu.points)
    ball_mass = np.bincount(balls[balls >= 0], weights=mu.weights[balls >= 0], minlength=len(cover))
    occ = cell_mass > 0
    if not np.any(occ):
        return 0.0
    if np.any(ball_mass[occ] == 0):
        return math.inf
    return float(np.max(cell_mass[occ] / ball_mass[occ]))


def approx_error_check(nu: ParticleMeasure, mu: ParticleMeasure, cover: CoverSpec, g: TestFunction,
                       t: float, P: ParticleMeasure | None = None) -> tuple[float, bool]:
    """|int g o f^t dnu - int g o f^t dP| and whether it is below 6 delta L(g)."""
    P = coarse_grain(nu, mu, cover) if P is None else P
    sys = cover.ctx.system
    lhs = abs(integrate(nu, lambda x: g(evolve(sys, t, x))) - integrate(P, lambda x: g(evolve(sys, t, x))))
    return lhs, lhs < 6.0 * cover.delta * g.lipschitz


# --------------------------------------------------------------------------
# Bowen-ball measure ratios


@dataclass(frozen=True)
class RatioEstimate:
    value: float  # math.inf when the denominator estimate is 0
    stderr: float
    numerator: float
    denominator: float
    num_hits: int
    den_hits: int

    @property
    def zero_denominator(self) -> bool:
        return self.den_hits == 0


def _ball_mass(sampler: DensitySpec, rng, n: int, ctx: BowenContext, x: np.ndarray, radius: float,
               window: float):
    """MC estimate of sampler-mass of the Bowen ball, and its hit count.

    Samples are localized to the box of half-width ``window`` about x when the
    sampler allows it (the Bowen ball lies inside the metric ball, hence inside
    that box); otherwise the whole law is sampled.
    """
    try:
        pts, box_mass = sampler.sample_local(rng, n, x, window)
    except NotImplementedError:
        pts, box_mass = sampler.sample(rng, n), sampler.mass
    if box_mass == 0 or pts.shape[0] == 0:
        return 0.0, 0
    g = ctx.grid.shape[0]
    tx = orbit_grid(ctx, x).reshape(g, 1, -1)
    hits = 0
    for s in range(0, pts.shape[0], 16384):
        tr = orbit_grid(ctx, pts[s:s + 16384]).reshape(g, -1, pts.shape[1])
        d = np.max(ctx.system.space.distance(tr, tx), axis=0)
        hits += int(np.count_nonzero(d < radius))
    return box_mass * hits / pts.shape[0], hits


def bowen_ratio_estimate(sys: SystemSpec, mu_sampler: DensitySpec, m_sampler: DensitySpec, x, delta: float,
                         tau: float, n_mc: int, seed: int, multiplier: float = 3.0,
                         ctx: BowenContext | None = None) -> RatioEstimate:
    """mu(B_delta^tau(x)) / m(B_{multiplier delta}^tau(x)) by Monte Carlo."""
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    ctx = ctx or bowen_context(sys, tau, delta)
    x = np.asarray(x, dtype=float).reshape(-1)
    window = multiplier * delta
    num, nh = _ball_mass(mu_sampler, generator(seed, 1), n_mc, ctx, x, delta, window)
    den, dh = _ball_mass(m_sampler, generator(seed, 2), n_mc, ctx, x, multiplier * delta, window)
    if dh == 0:
        return RatioEstimate(math.inf, math.inf, float(num), float(den), nh, dh)
    value = num / den
    rel = 0.0
    for h in (nh, dh):
        p = h / n_mc
        rel += (1.0 - p) / h if h > 0 else 0.0
    return RatioEstimate(float(value), float(value * math.sqrt(rel)), float(num), float(den), nh, dh)


def bowen_ratio(sys, mu_sampler, m_sampler, x, delta, tau, n_mc, seed, multiplier: float = 3.0) -> float:
    return bowen_ratio_estimate(sys, mu_sampler, m_sampler, x, delta, tau, n_mc, seed, multiplier).value


@dataclass(frozen=True)
class ScanRow:
    tau: float
    min_ratio: float
    n_zero_denominators: int


def cehyp_scan(sys: SystemSpec, mu_sampler: DensitySpec, m_sampler: DensitySpec, A_sampler: DensitySpec,
               delta: float, tau_list, n_x: int, n_mc: int, seed: int, multiplier: float = 3.0,
               workers: int = 1) -> list[ScanRow]:
    """For each tau, the minimum Bowen ratio over n_x centers sampled from A.

    Each (tau, x) task draws from its own stream keyed by its indices, so the
    table does not depend on ``workers``.
    """
    xs = A_sampler.sample(generator(seed, 0), n_x)
    tau_list = list(tau_list)
    tasks = [(j, i) for j in range(len(tau_list)) for i in range(n_x)]

    def run(task):
        j, i = task
        return bowen_ratio_estimate(sys, mu_sampler, m_sampler, xs[i], delta, tau_list[j], n_mc,
                                    _task_seed(seed, j, i), multiplier)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    rows = []
    for j, tau in enumerate(tau_list):
        ests = results[j * n_x:(j + 1) * n_x]
        rows.append(ScanRow(float(tau), float(min(e.value for e in ests)), int(sum(e.zero_denominator for e in ests))))
    return rows


def _task_seed(seed: int, j: int, i: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(3, j, i)).generate_state(2, np.uint64)[0])


# --------------------------------------------------------------------------
# serialization


def write_cover(cover: CoverSpec, path) -> None:
    """Centers CSV (i,x1..xd) plus a JSON sidecar next to it."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["i"] + [f"x{k + 1}" for k in range(cover.centers.shape[1])])
        for i, c in enumerate(cover.centers.tolist()):
            wr.writerow([i] + [repr(v) for v in c])
    side = {
        "system": cover.ctx.system.system_id,
        "tau": cover.ctx.tau,
        "delta": cover.delta,
        "multiplier": cover.multiplier,
        "grid": cover.ctx.grid.tolist(),
    }
    path.with_suffix(".json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")


def read_cover(path, sys: SystemSpec) -> CoverSpec:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    centers = np.array([[float(v) for v in r[1:]] for r in rows], dtype=float)
    ctx = BowenContext(sys, side["tau"], np.asarray(side["grid"], dtype=float))
    return CoverSpec(ctx, side["delta"], centers, centers, side["multiplier"])


def write_scan(rows: list[ScanRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["tau", "min_ratio", "n_zero_denominators"])
        for r in rows:
            wr.writerow([repr(float(r.tau)), repr(float(r.min_ratio)), int(r.n_zero_denominators)])


def read_scan(path) -> list[ScanRow]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [ScanRow(float(a), float(b), int(c)) for a, b, c in rows]
