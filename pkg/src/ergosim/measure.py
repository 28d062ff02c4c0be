"""Particle representation of finite Borel measures.

A measure is a weighted ensemble of points in a flat metric space (products of
line segments and unit circles). Pushforward moves particles, so it is exact;
weak distances are estimated with a bounded-Lipschitz probe family, or computed
exactly by optimal transport on one-dimensional spaces.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import BadSupport, MapDomain, NullConditioning, SpaceMismatch, ZeroMass
from .rng import generator


# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class MetricSpace:
    """Flat product space; periodic coordinates live in [0, 1)."""

    space_id: str
    periodic: tuple[bool, ...]

    @property
    def dim(self) -> int:
        return len(self.periodic)

    @property
    def _mask(self) -> np.ndarray:
        return np.array(self.periodic, dtype=bool)

    def wrap(self, x) -> np.ndarray:
        x = np.array(x)
        if x.dtype.kind != "O":
            x = x.astype(float)
        if not any(self.periodic):
            return x
        m = self._mask
        x[..., m] = np.mod(x[..., m], 1)
        if x.dtype.kind == "f":
            # np.mod of a tiny negative number can round to exactly 1.0
            sub = x[..., m]
            sub[sub >= 1.0] = 0.0
            x[..., m] = sub
        return x

    def distance(self, a, b) -> np.ndarray:
        diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        if any(self.periodic):
            m = self._mask
            per = np.mod(diff[..., m], 1.0)
            diff[..., m] = np.minimum(per, 1.0 - per)
        if diff.shape[-1] == 1:
            return diff[..., 0]
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.all(np.isfinite(x), axis=-1)
        if any(self.periodic):
            per = x[..., self._mask]
            ok &= np.all((per >= 0.0) & (per < 1.0), axis=-1)
        return ok


def line() -> MetricSpace:
    return MetricSpace("line", (False,))


def circle() -> MetricSpace:
    return MetricSpace("circle", (True,))


def plane() -> MetricSpace:
    return MetricSpace("plane", (False, False))


def torus(dim: int = 2) -> MetricSpace:
    return MetricSpace(f"torus{dim}", (True,) * dim)


def cylinder() -> MetricSpace:
    """Angle in [0, 1) times a radial line coordinate."""
    return MetricSpace("cylinder", (True, False))


def torus_line(dim: int = 2) -> MetricSpace:
    return MetricSpace(f"torus{dim}xline", (True,) * dim + (False,))


def as_points(x, space: MetricSpace) -> np.ndarray:
    """Coerce a single point or a batch to an (n, d) float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if x.shape[0] == space.dim else x.reshape(-1, 1)
    if x.shape[-1] != space.dim:
        raise SpaceMismatch(f"points of dimension {x.shape[-1]} in {space.space_id} (dimension {space.dim})")
    return x


# --------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class ParticleMeasure:
    points: np.ndarray
    weights: np.ndarray
    space: MetricSpace

    def __post_init__(self):
        pts = as_points(self.points, self.space)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] == 0:
            raise ValueError("empty particle measure")
        if w.shape[0] != pts.shape[0]:
            raise ValueError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points, space: MetricSpace) -> "ParticleMeasure":
        pts = as_points(points, space)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]), space)

    @classmethod
    def dirac(cls, point, space: MetricSpace) -> "ParticleMeasure":
        return cls(as_points(point, space), np.ones(1), space)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def total_mass(self) -> float:
        # np.sum reduces contiguous float arrays pairwise, in a fixed order
        return float(np.sum(self.weights))


def normalize(mu: ParticleMeasure) -> ParticleMeasure:
    total = mu.total_mass
    if total <= 0.0:
        raise ZeroMass("cannot normalize a measure of zero mass")
    return ParticleMeasure(mu.points, mu.weights / total, mu.space)


def mix(components: Iterable[tuple[float, ParticleMeasure]]) -> ParticleMeasure:
    """Finite combination sum c_i * mu_i, as one ensemble."""
    components = list(components)
    space = components[0][1].space
    for _, m in components:
        if m.space != space:
            raise SpaceMismatch(f"{m.space.space_id} vs {space.space_id}")
    pts = np.concatenate([m.points for _, m in components])
    w = np.concatenate([c * m.weights for c, m in components])
    return ParticleMeasure(pts, w, space)


def integrate(mu: ParticleMeasure, g: Callable) -> float:
    values = np.asarray(g(mu.points), dtype=float).reshape(-1)
    return float(np.sum(mu.weights * values))


def pushforward(mu: ParticleMeasure, fmap: Callable, space: MetricSpace | None = None) -> ParticleMeasure:
    """Move every particle by ``fmap``; weights are carried over untouched."""
    space = space or mu.space
    moved = np.asarray(fmap(mu.points), dtype=float)
    moved = moved.reshape(len(mu), space.dim)
    if not np.all(space.contains(moved)):
        raise MapDomain(f"pushforward left the domain of {space.space_id}")
    return ParticleMeasure(moved, mu.weights, space)


def condition(mu: ParticleMeasure, region: Callable) -> ParticleMeasure:
    """mu(. | region), region given as a vectorized membership predicate."""
    inside = np.asarray(region(mu.points), dtype=bool).reshape(-1)
    mass = float(np.sum(mu.weights[inside]))
    if not mass > 0.0:
        raise NullConditioning("conditioning region carries no particle mass")
    return ParticleMeasure(mu.points[inside], mu.weights[inside] / mass, mu.space)


# --------------------------------------------------------------------------
# test functions and densities


@dataclass(frozen=True)
class TestFunction:
    """Observable with a declared sup-bound and Lipschitz constant."""

    __test__ = False  # keep pytest from collecting this class

    fn: Callable[[np.ndarray], np.ndarray]
    bound: float
    lipschitz: float
    name: str = ""

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(points, dtype=float))), dtype=float).reshape(-1)


@dataclass(frozen=True)
class DensitySpec:
    """Law supported on a box (optionally cut by a Euclidean ball).

    A coordinate with ``low == high`` is degenerate: the law is singular there,
    e.g. the uniform measure on the circle r = 1 inside the cylinder. ``density``
    is an unnormalised closure bounded by ``density_max``; ``None`` means
    uniform. ``mass`` is the total mass represented (1 for probability laws, the
    box volume for a Lebesgue reference measure).
    """

    space: MetricSpace
    low: tuple[float, ...]
    high: tuple[float, ...]
    density: Callable[[np.ndarray], np.ndarray] | None = None
    density_max: float | None = None
    ball_center: tuple[float, ...] | None = None
    ball_radius: float | None = None
    mass: float = 1.0
    seed: int = 0

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float).reshape(-1)
        high = np.asarray(self.high, dtype=float).reshape(-1)
        if low.shape[0] != self.space.dim or high.shape[0] != self.space.dim:
            raise SpaceMismatch("support box dimension does not match the space")
        if np.any(high < low) or not np.all(np.isfinite(low)) or not np.all(np.isfinite(high)):
            raise BadSupport(f"empty support box {tuple(low)}..{tuple(high)}")
        if self.ball_radius is not None and self.ball_radius <= 0:
            raise BadSupport("ball radius must be positive")
        if self.density is not None and not (self.density_max and self.density_max > 0):
            raise ValueError("a density closure needs a positive density_max")

    @property
    def _low(self) -> np.ndarray:
        return np.asarray(self.low, dtype=float)

    @property
    def _high(self) -> np.ndarray:
        return np.asarray(self.high, dtype=float)

    def contains(self, x) -> np.ndarray:
        x = as_points(x, self.space)
        low, high = self._low, self._high
        ok = np.ones(x.shape[0], dtype=bool)
        for k in range(self.space.dim):
            if self.space.periodic[k] and high[k] - low[k] >= 1.0:
                continue
            v = x[:, k]
            if self.space.periodic[k]:
                v = low[k] + np.mod(v - low[k], 1.0)
            if high[k] == low[k]:
                ok &= np.abs(v - low[k]) <= 1e-12
            else:
                ok &= (v >= low[k]) & (v <= high[k])
        if self.ball_center is not None:
            ok &= self.space.distance(x, np.asarray(self.ball_center, dtype=float)) < self.ball_radius
        return ok

    def _accept(self, rng: np.random.Generator, pts: np.ndarray) -> np.ndarray:
        keep = np.ones(pts.shape[0], dtype=bool)
        if self.ball_center is not None:
            keep &= self.space.distance(pts, np.asarray(self.ball_center, dtype=float)) < self.ball_radius
        if self.density is not None:
            u = rng.random(pts.shape[0]) * self.density_max
            keep &= u < np.asarray(self.density(pts), dtype=float)
        return keep

    def _draw(self, rng: np.random.Generator, n: int, low: np.ndarray, high: np.ndarray) -> np.ndarray:
        out = []
        have = 0
        plain = self.ball_center is None and self.density is None
        for _ in range(200):
            batch = n - have if plain else max(2 * (n - have), 64)
            pts = low + (high - low) * rng.random((batch, self.space.dim))
            pts = self.space.wrap(pts)
            if not plain:
                pts = pts[self._accept(rng, pts)]
            out.append(pts[: n - have])
            have += out[-1].shape[0]
            if have >= n:
                return np.concatenate(out)
        raise BadSupport("rejection sampling found (almost) no mass in the support")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._draw(rng, n, self._low, self._high)

    def sample_local(self, rng: np.random.Generator, n: int, center, radius: float):
        """Draw from the law restricted to the box of half-width ``radius`` around
        ``center``; returns the points and the mass of that box.

        Only uniform box laws support this; others raise NotImplementedError.
        """
        if self.density is not None or self.ball_center is not None:
            raise NotImplementedError("localized sampling needs a uniform box law")
        center = np.asarray(center, dtype=float).reshape(-1)
        low, high = self._low.copy(), self._high.copy()
        frac = 1.0
        for k in range(self.space.dim):
            c = center[k]
            if high[k] == low[k]:
                gap = abs(c - low[k])
                if self.space.periodic[k]:
                    gap = min(gap % 1.0, 1.0 - gap % 1.0)
                if gap > radius:
                    return np.empty((0, self.space.dim)), 0.0
                continue
            if self.space.periodic[k] and high[k] - low[k] >= 1.0:
                lo, hi = c - radius, c + radius
                frac *= min(2 * radius, 1.0) / (high[k] - low[k])
            else:
                if self.space.periodic[k]:
                    mid = 0.5 * (low[k] + high[k])
                    c = c + np.round(mid - c)
                lo, hi = max(low[k], c - radius), min(high[k], c + radius)
                if hi <= lo:
                    return np.empty((0, self.space.dim)), 0.0
                frac *= (hi - lo) / (high[k] - low[k])
            low[k], high[k] = lo, hi
        return self._draw(rng, n, low, high), self.mass * frac


def sample_density(spec: DensitySpec, n: int, seed: int | None = None) -> ParticleMeasure:
    if n < 1:
        raise ValueError("need at least one particle")
    rng = generator(spec.seed if seed is None else seed)
    return ParticleMeasure.uniform(spec.sample(rng, n), spec.space)


def grid_measure(spec: DensitySpec, n: int) -> ParticleMeasure:
    """Deterministic midpoint-rule quadrature of a uniform law on a 1-D support
    (other coordinates degenerate)."""
    free = [k for k in range(spec.space.dim) if spec.high[k] > spec.low[k]]
    if len(free) != 1 or spec.density is not None:
        raise ValueError("grid_measure supports uniform laws with one free coordinate")
    k = free[0]
    pts = np.tile(np.asarray(spec.low, dtype=float), (n, 1))
    pts[:, k] = spec.low[k] + (spec.high[k] - spec.low[k]) * (np.arange(n) + 0.5) / n
    return ParticleMeasure.uniform(spec.space.wrap(pts), spec.space)


# --------------------------------------------------------------------------
# weak distances


def _check_same(mu: ParticleMeasure, nu: ParticleMeasure):
    if mu.space != nu.space:
        raise SpaceMismatch(f"{mu.space.space_id} vs {nu.space.space_id}")


def _cdf_gap(mu: ParticleMeasure, nu: ParticleMeasure):
    """Merged sorted positions and F_mu - F_nu on each gap between them."""
    x = np.concatenate([mu.points[:, 0], nu.points[:, 0]])
    w = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    return x, np.cumsum(w)


def wasserstein1_line(mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    _check_same(mu, nu)
    if mu.space.periodic != (False,):
        raise SpaceMismatch("wasserstein1_line needs a 1-D non-periodic space")
    x, h = _cdf_gap(mu, nu)
    return float(np.sum(np.abs(h[:-1]) * np.diff(x)))


def wasserstein1_circle(mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    """W1 on the unit circle: min over c of the L1 norm of (F - G - c)."""
    _check_same(mu, nu)
    if mu.space.periodic != (True,):
        raise SpaceMismatch("wasserstein1_circle needs the circle")
    x, h = _cdf_gap(mu, nu)
    lengths = np.concatenate([[x[0]], np.diff(x), [1.0 - x[-1]]])
    values = np.concatenate([[0.0], h[:-1], [h[-1]]])
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(lengths[order])
    c = values[order][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(np.sum(lengths * np.abs(values - c)))


@dataclass(frozen=True)
class ProbeConfig:
    """Deterministic probe family for the bounded-Lipschitz lower bound.

    Probes are g(x) = clip(r - d(x, p), -1, 1) (1-Lipschitz, sup-bound 1) and
    their negations, anchored at up to ``n_anchors`` particles of each measure
    and radii 2^-4 .. 2^2.
    """

    n_anchors: int = 32
    radii: tuple[float, ...] = tuple(2.0 ** k for k in range(-4, 3))
    seed: int = 0
    exact_1d: bool = True


def _anchors(mu: ParticleMeasure, k: int, rng: np.random.Generator) -> np.ndarray:
    if len(mu) <= k:
        return mu.points
    idx = rng.choice(len(mu), size=k, replace=False, p=None)
    return mu.points[np.sort(idx)]


def _probe_integrals(mu: ParticleMeasure, anchors: np.ndarray, radii: np.ndarray) -> np.ndarray:
    out = np.empty((anchors.shape[0], radii.shape[0]))
    for i, p in enumerate(anchors):
        d = mu.space.distance(mu.points, p)
        g = np.clip(radii[None, :] - d[:, None], -1.0, 1.0)
        out[i] = mu.weights @ g
    return out


def bl_probe(mu: ParticleMeasure, nu: ParticleMeasure, probe: ProbeConfig = ProbeConfig()) -> float:
    _check_same(mu, nu)
    rng = generator(probe.seed, 0xB1)
    anchors = np.concatenate([_anchors(mu, probe.n_anchors, rng), _anchors(nu, probe.n_anchors, rng)])
    radii = np.asarray(probe.radii, dtype=float)
    diff = _probe_integrals(mu, anchors, radii) - _probe_integrals(nu, anchors, radii)
    return float(min(np.max(np.abs(diff)), 2.0))


def bl_distance(mu: ParticleMeasure, nu: ParticleMeasure, probe: ProbeConfig = ProbeConfig()) -> float:
    """Bounded-Lipschitz distance estimate between two probability measures.

    On the circle (diameter 1/2) and on line ensembles of diameter at most 2 the
    BL distance equals W1 and is computed exactly; elsewhere a deterministic
    lower bound from the probe family is returned.
    """
    _check_same(mu, nu)
    if probe.exact_1d and mu.space.dim == 1:
        if mu.space.periodic[0]:
            return wasserstein1_circle(mu, nu)
        lo = min(mu.points.min(), nu.points.min())
        hi = max(mu.points.max(), nu.points.max())
        if hi - lo <= 2.0:
            return wasserstein1_line(mu, nu)
    return bl_probe(mu, nu, probe)


# --------------------------------------------------------------------------
# CSV round trip


def write_csv(mu: ParticleMeasure, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["w"] + [f"x{k + 1}" for k in range(mu.dim)])
        for w, p in zip(mu.weights.tolist(), mu.points.tolist()):
            wr.writerow([repr(w)] + [repr(v) for v in p])


def read_csv(path, space: MetricSpace) -> ParticleMeasure:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "w" or len(header) != space.dim + 1:
        raise SpaceMismatch(f"CSV header {header} does not match {space.space_id}")
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(-1, space.dim + 1)
    return ParticleMeasure(data[:, 1:], data[:, 0], space)
