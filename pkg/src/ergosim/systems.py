"""Semiflows, Bowen metrics and the built-in system zoo."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import counterexample as cx
from .errors import MapDomain, NegativeTime, StepTooLarge
from .measure import DensitySpec, MetricSpace, circle, cylinder, line, plane, torus, torus_line


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A semiflow on a metric space.

    Discrete systems supply ``step`` (one iteration); continuous systems supply
    a closed-form ``flow(t, X)`` (t scalar or one time per row) and/or a vector
    ``field(X)``. The closed form is authoritative when both exist.
    """

    system_id: str
    space: MetricSpace
    time_kind: str
    step: Callable | None = None
    flow: Callable | None = None
    field: Callable | None = None
    speed_bound: float = 1.0
    domain: Callable | None = None
    attractor: DensitySpec | None = None
    measure: DensitySpec | None = None
    neighbourhood: DensitySpec | None = None
    reference: DensitySpec | None = None
    on_attractor: Callable | None = None
    partner: Callable | None = None
    attractor_param: Callable | None = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.time_kind not in ("discrete", "continuous"):
            raise ValueError(f"time_kind must be discrete or continuous, not {self.time_kind!r}")
        if self.time_kind == "discrete" and self.step is None:
            raise ValueError("a discrete system needs a step map")
        if self.time_kind == "continuous" and self.flow is None and self.field is None:
            raise ValueError("a continuous system needs a flow or a vector field")

    @property
    def discrete(self) -> bool:
        return self.time_kind == "discrete"


def _as_batch(sys: SystemSpec, x):
    x = np.array(x)
    if x.dtype.kind != "O":
        x = x.astype(float)
    single = x.ndim <= 1
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1)
    return x, single


def _check_domain(sys: SystemSpec, x: np.ndarray):
    if x.dtype.kind == "O":
        return
    ok = sys.space.contains(x)
    if sys.domain is not None:
        ok &= sys.domain(x)
    if not np.all(ok):
        raise MapDomain(f"orbit left the domain of {sys.system_id}")


def _integer_time(t) -> int:
    n = int(round(float(t)))
    if n != float(t):
        raise ValueError(f"discrete systems need integer times, got {t}")
    return n


def evolve(sys: SystemSpec, t, x) -> np.ndarray:
    """f^t x for a point or a batch of points (rows).

    Discrete maps accept object arrays of ``fractions.Fraction`` coordinates and
    then iterate exactly.
    """
    if np.any(np.asarray(t, dtype=float) < 0):
        raise NegativeTime("semiflow times are nonnegative")
    xb, single = _as_batch(sys, x)
    xb = sys.space.wrap(xb)
    _check_domain(sys, xb)
    if sys.discrete:
        n = _integer_time(t)
        for _ in range(n):
            xb = sys.space.wrap(sys.step(xb))
    elif np.all(np.asarray(t) == 0):
        xb = xb.copy()
    elif sys.flow is not None:
        xb = sys.space.wrap(sys.flow(t, xb))
    else:
        xb = integrate_flow(sys, float(t), xb, 1e-3)
    _check_domain(sys, xb)
    return xb[0] if single else xb


def trajectory(sys: SystemSpec, times, x) -> np.ndarray:
    """States at each of the nondecreasing ``times``: shape (len(times), n, d),
    or (len(times), d) for a single point."""
    times = np.asarray(times, dtype=float)
    xb, single = _as_batch(sys, x)
    out = np.empty((times.shape[0],) + xb.shape, dtype=xb.dtype)
    if sys.discrete:
        cur, now = xb, 0
        for k, t in enumerate(times):
            n = _integer_time(t)
            if n < now:
                raise ValueError("trajectory times must be nondecreasing")
            for _ in range(n - now):
                cur = sys.space.wrap(sys.step(cur))
            now = n
            out[k] = cur
    else:
        for k, t in enumerate(times):
            out[k] = evolve(sys, t, xb)
    if not sys.discrete or xb.dtype.kind != "O":
        _check_domain(sys, out.reshape(-1, xb.shape[-1]))
    return out[:, 0] if single else out


# --------------------------------------------------------------------------
# integration


def _rk4(field_fn, x: np.ndarray, h: float, n: int) -> np.ndarray:
    for _ in range(n):
        k1 = field_fn(x)
        k2 = field_fn(x + 0.5 * h * k1)
        k3 = field_fn(x + 0.5 * h * k2)
        k4 = field_fn(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def integrate_flow(sys: SystemSpec, t: float, x, step: float) -> np.ndarray:
    """Classical fixed-step RK4 on the vector field over [0, t]. The step is
    shrunk to t / ceil(t / step) so that the final time is hit exactly."""
    if sys.field is None:
        raise ValueError(f"{sys.system_id} has no vector field")
    if t < 0:
        raise NegativeTime("semiflow times are nonnegative")
    if step <= 0:
        raise ValueError("step must be positive")
    if t > 0 and step > t:
        raise StepTooLarge(f"step {step} exceeds the horizon {t}")
    xb, single = _as_batch(sys, x)
    if t > 0:
        n = int(math.ceil(t / step - 1e-9))
        xb = _rk4(sys.field, xb, t / n, n)
    xb = sys.space.wrap(xb)
    return xb[0] if single else xb


def integrate_trajectory(sys: SystemSpec, times, x, step: float) -> np.ndarray:
    """RK4 states at each grid time; one continuous run, with the step shrunk
    inside each grid interval to land on the grid."""
    times = np.asarray(times, dtype=float)
    xb, single = _as_batch(sys, x)
    out = np.empty((times.shape[0],) + xb.shape)
    cur, now = xb, 0.0
    for k, t in enumerate(times):
        gap = t - now
        if gap < 0:
            raise ValueError("trajectory times must be nondecreasing")
        if gap > 0:
            n = max(1, int(math.ceil(gap / step - 1e-9)))
            cur = _rk4(sys.field, cur, gap / n, n)
        now = t
        out[k] = sys.space.wrap(cur)
    return out[:, 0] if single else out


# --------------------------------------------------------------------------
# Bowen metrics


@dataclass(frozen=True, eq=False)
class BowenContext:
    system: SystemSpec
    tau: float
    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).reshape(-1)
        if g.shape[0] == 0 or g[0] != 0.0 or g[-1] != float(self.tau):
            raise ValueError("Bowen grid must start at 0 and end at tau")
        if np.any(np.diff(g) <= 0):
            raise ValueError("Bowen grid must be strictly increasing")
        object.__setattr__(self, "grid", g)


def bowen_context(sys: SystemSpec, tau: float, delta: float | None = None, spacing: float | None = None) -> BowenContext:
    """Grid: all integers 0..tau for maps; for flows a uniform grid with spacing
    0.05 * min(1, delta / speed_bound) unless given."""
    if tau < 0:
        raise NegativeTime("tau must be nonnegative")
    if sys.discrete:
        return BowenContext(sys, _integer_time(tau), np.arange(_integer_time(tau) + 1, dtype=float))
    if tau == 0:
        return BowenContext(sys, 0.0, np.zeros(1))
    if spacing is None:
        spacing = 0.05 * min(1.0, (delta if delta is not None else 1.0) / sys.speed_bound)
    n = max(1, int(math.ceil(tau / spacing - 1e-9)))
    return BowenContext(sys, float(tau), np.linspace(0.0, tau, n + 1))


def orbit_grid(ctx: BowenContext, x) -> np.ndarray:
    return trajectory(ctx.system, ctx.grid, x)


def bowen_distance(ctx: BowenContext, x, y) -> np.ndarray:
    """max over the grid of d(f^t x, f^t y); x and y broadcast row-wise."""
    tx = orbit_grid(ctx, x)
    ty = orbit_grid(ctx, y)
    d = ctx.system.space.distance(tx, ty)
    out = np.max(d, axis=0)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# zoo


def _uniform(space: MetricSpace, low, high, mass: float = 1.0) -> DensitySpec:
    return DensitySpec(space, tuple(low), tuple(high), mass=mass)


def identity(space: MetricSpace | None = None) -> SystemSpec:
    space = space or line()
    leb = _uniform(space, (0.0,) * space.dim, (1.0,) * space.dim)
    return SystemSpec(
        "identity", space, "discrete",
        step=lambda x: x,
        speed_bound=0.0,
        attractor=leb, measure=leb, neighbourhood=leb, reference=leb,
        on_attractor=lambda x: np.ones(np.atleast_2d(x).shape[0], dtype=bool),
        partner=lambda x: np.array(x, dtype=float),
    )


def doubling() -> SystemSpec:
    sp = circle()
    leb = _uniform(sp, (0.0,), (1.0,))
    return SystemSpec(
        "doubling", sp, "discrete",
        step=lambda x: np.mod(2 * x, 1),
        attractor=leb, measure=leb, neighbourhood=leb, reference=leb,
        on_attractor=lambda x: np.ones(np.atleast_2d(x).shape[0], dtype=bool),
        partner=lambda x: np.array(x, dtype=float),
        attractor_param=lambda u: np.mod(np.atleast_1d(u), 1.0),
        params={"dim_param": 1},
    )


CAT_MATRIX = np.array([[2, 1], [1, 1]])


def cat() -> SystemSpec:
    sp = torus(2)
    leb = _uniform(sp, (0.0, 0.0), (1.0, 1.0))
    return SystemSpec(
        "cat", sp, "discrete",
        step=lambda x: np.mod(x @ CAT_MATRIX.T, 1),
        attractor=leb, measure=leb, neighbourhood=leb, reference=leb,
        on_attractor=lambda x: np.ones(np.atleast_2d(x).shape[0], dtype=bool),
        partner=lambda x: np.array(x, dtype=float),
        attractor_param=lambda u: np.mod(np.asarray(u, dtype=float), 1.0),
        params={"dim_param": 2},
    )


def rotation(speed: float = 1.0) -> SystemSpec:
    sp = circle()
    leb = _uniform(sp, (0.0,), (1.0,))

    def flow(t, x):
        t = np.asarray(t, dtype=float)
        return x + speed * (t.reshape(-1, 1) if t.ndim else t)

    return SystemSpec(
        "rotation", sp, "continuous",
        flow=flow,
        field=lambda x: np.full_like(np.asarray(x, dtype=float), speed),
        speed_bound=abs(speed) or 1.0,
        attractor=leb, measure=leb, neighbourhood=leb, reference=leb,
        on_attractor=lambda x: np.ones(np.atleast_2d(x).shape[0], dtype=bool),
        partner=lambda x: np.array(x, dtype=float),
        attractor_param=lambda u: np.mod(np.atleast_1d(u), 1.0),
        params={"speed": speed, "dim_param": 1},
    )


def planar_rotation() -> SystemSpec:
    """x' = -y, y' = x; every circle about 0 is invariant and none attracts."""
    sp = plane()

    def flow(t, x):
        t = np.asarray(t, dtype=float)
        if t.ndim:
            t = t.reshape(-1)
        c, s = np.cos(t), np.sin(t)
        return np.stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1]], axis=-1)

    def circle_point(u):
        a = 2 * np.pi * np.atleast_1d(np.asarray(u, dtype=float))[..., 0]
        return np.stack([np.cos(a), np.sin(a)], axis=-1)

    class _UnitCircle(DensitySpec):
        def sample(self, rng, n):
            return circle_point(rng.random((n, 1)))

    a = _UnitCircle(sp, (-1.0, -1.0), (1.0, 1.0))
    return SystemSpec(
        "planar_rotation", sp, "continuous",
        flow=flow,
        field=lambda x: np.stack([-x[:, 1], x[:, 0]], axis=-1),
        speed_bound=2.0,
        attractor=a, measure=a,
        on_attractor=lambda x: np.abs(np.hypot(*np.atleast_2d(x).T) - 1.0) < 1e-12,
        attractor_param=circle_point,
        params={"dim_param": 1, "param_of": lambda y: [math.atan2(y[1], y[0]) / (2 * math.pi)]},
    )


def doubling_contract() -> SystemSpec:
    """(theta, r) -> (2 theta mod 1, 1 + (r - 1)/2) on the annulus 0 < r < 2."""
    sp = cylinder()

    def step(x):
        out = x.copy()
        out[:, 0] = np.mod(2 * x[:, 0], 1)
        out[:, 1] = 1 + (x[:, 1] - 1) / 2
        return out

    def partner(x):
        p = np.array(x, dtype=float)
        p[..., 1] = 1.0
        return p

    def param(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))[..., :1]
        return np.concatenate([np.mod(u, 1.0), np.ones_like(u)], axis=-1)

    return SystemSpec(
        "doubling_contract", sp, "discrete",
        step=step,
        domain=lambda x: (x[:, 1] > 0) & (x[:, 1] < 2),
        attractor=_uniform(sp, (0.0, 1.0), (1.0, 1.0)),
        measure=_uniform(sp, (0.0, 1.0), (1.0, 1.0)),
        neighbourhood=_uniform(sp, (0.0, 0.5), (1.0, 1.5)),
        reference=_uniform(sp, (0.0, 0.0), (1.0, 2.0), mass=2.0),
        on_attractor=lambda x: np.abs(np.atleast_2d(x)[:, 1] - 1.0) <= 1e-12,
        partner=partner,
        attractor_param=param,
        params={"dim_param": 1},
    )


def linear_torus(omega=(1.0, math.sqrt(2.0))) -> SystemSpec:
    """x' = omega on the flat torus; defined for all real times."""
    omega = np.asarray(omega, dtype=float)
    sp = torus(omega.shape[0])
    leb = _uniform(sp, (0.0,) * omega.shape[0], (1.0,) * omega.shape[0])

    def flow(t, x):
        t = np.asarray(t, dtype=float)
        shift = t.reshape(-1, 1) * omega if t.ndim else t * omega
        return np.mod(x + shift, 1.0)

    return SystemSpec(
        "linear_torus", sp, "continuous",
        flow=flow,
        field=lambda x: np.broadcast_to(omega, np.shape(x)).astype(float),
        speed_bound=float(np.linalg.norm(omega)),
        attractor=leb, measure=leb, neighbourhood=leb, reference=leb,
        params={"omega": tuple(omega.tolist())},
    )


def counterexample(omega=(1.0, math.sqrt(2.0)), base: SystemSpec | None = None) -> SystemSpec:
    """Skew product over ``base`` (default: the linear torus flow with
    frequency ``omega``); fixed fiber y = 0 carries the attracting measure."""
    base = base or linear_torus(omega)
    db = base.space.dim
    sp = torus_line(db) if all(base.space.periodic) else MetricSpace(
        base.space.space_id + "xline", base.space.periodic + (False,))
    zero = (0.0,) * db
    one = (1.0,) * db

    return SystemSpec(
        "counterexample", sp, "continuous",
        flow=lambda t, x: cx.skew_flow(base, t, x),
        field=lambda x: cx.skew_field(base, x),
        speed_bound=base.speed_bound + 2.0,
        attractor=DensitySpec(sp, zero + (0.0,), one + (0.0,)),
        measure=DensitySpec(sp, zero + (0.0,), one + (0.0,)),
        neighbourhood=DensitySpec(sp, zero + (-1.0,), one + (1.0,)),
        reference=DensitySpec(sp, zero + (-1.0,), one + (1.0,), mass=2.0),
        on_attractor=lambda x: np.atleast_2d(x)[:, -1] == 0.0,
        params={"base": base, "omega": base.params.get("omega")},
    )


ZOO: dict[str, Callable[..., SystemSpec]] = {
    "identity": identity,
    "doubling": doubling,
    "cat": cat,
    "rotation": rotation,
    "doubling_contract": doubling_contract,
    "counterexample": counterexample,
    "planar_rotation": planar_rotation,
    "linear_torus": linear_torus,
}


def get_system(system_id: str, **params) -> SystemSpec:
    try:
        factory = ZOO[system_id]
    except KeyError:
        raise KeyError(f"unknown system {system_id!r}; known: {', '.join(sorted(ZOO))}") from None
    return factory(**params)
