"""Skew-product flow over a base flow whose fiber coordinate decays like
1/(t log t).

On the invariant fiber y = 0 every point is fixed; off it the fiber coordinate
creeps to 0 while the base clock psi runs only like log log t. Everything here
is closed form, with the RK4 integrator of the vector field as cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def F_eval(t):
    """1 / (t log t) on (1, inf)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1.0):
        raise DomainError("F is defined on (1, inf)")
    out = 1.0 / (t * np.log(t))
    return float(out) if out.ndim == 0 else out


def F_prime(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1.0):
        raise DomainError("F' is defined on (1, inf)")
    lt = np.log(t)
    out = -(1.0 + lt) / (t * t * lt * lt)
    return float(out) if out.ndim == 0 else out


def F_second(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1.0):
        raise DomainError("F'' is defined on (1, inf)")
    lt = np.log(t)
    out = (2.0 * lt * lt + 3.0 * lt + 2.0) / (t ** 3 * lt ** 3)
    return float(out) if out.ndim == 0 else out


# F_inv: with u = log t the equation t log t = 1/y becomes u + log u = -log y,
# which is monotone in u and well scaled for any y > 0.

_BISECT_STEPS = 12
_NEWTON_STEPS = 60
_RESIDUAL = 1e-13


def _bracket(y: float) -> tuple[float, float]:
    lo = min(math.log1p(1e-9), 0.25 / y)
    a = math.log(2.0) - math.log(y)
    hi = math.log(3.0) if a <= 1.0 else max(math.log(3.0), a + math.log(a))
    return lo, hi


def _f_inv_scalar(y: float) -> float:
    L = -math.log(y)
    lo, hi = _bracket(y)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid + math.log(mid) - L < 0.0:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        h = u + math.log(u) - L
        if abs(h) <= _RESIDUAL:
            break
        if h < 0.0:
            lo = u
        else:
            hi = u
        step = h / (1.0 + 1.0 / u)
        nxt = u - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == u:
            break
        u = nxt
    return math.exp(u)


def _f_inv_array(y: np.ndarray) -> np.ndarray:
    L = -np.log(y)
    lo = np.minimum(math.log1p(1e-9), 0.25 / y)
    a = math.log(2.0) + L
    with np.errstate(invalid="ignore", divide="ignore"):
        hi = np.where(a <= 1.0, math.log(3.0), np.maximum(math.log(3.0), a + np.log(np.maximum(a, 1.0))))
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        neg = mid + np.log(mid) - L < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    u = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        h = u + np.log(u) - L
        active = np.abs(h) > _RESIDUAL
        if not np.any(active):
            break
        lo = np.where(h < 0.0, u, lo)
        hi = np.where(h < 0.0, hi, u)
        nxt = u - h / (1.0 + 1.0 / u)
        nxt = np.where((nxt > lo) & (nxt < hi), nxt, 0.5 * (lo + hi))
        stalled = nxt == u
        u = np.where(active, nxt, u)
        if np.all(stalled | ~active):
            break
    return np.exp(u)


def F_inv(y):
    """Inverse of F: the t > 1 with t log t = 1/y, for y > 0."""
    if np.ndim(y) == 0:
        y = float(y)
        if not y > 0.0 or not math.isfinite(y):
            raise DomainError("F^-1 is defined on (0, inf)")
        return _f_inv_scalar(y)
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0.0)) or not np.all(np.isfinite(y)):
        raise DomainError("F^-1 is defined on (0, inf)")
    if y.size <= 16:
        return np.array([_f_inv_scalar(v) for v in y.reshape(-1)]).reshape(y.shape)
    return _f_inv_array(y)


def b2(y):
    """Fiber component of the vector field; b2(0) = 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    nz = y != 0.0
    if np.any(nz):
        out[nz] = np.sign(y[nz]) * F_prime(np.atleast_1d(F_inv(np.abs(y[nz]))))
    return float(out) if out.ndim == 0 else out


def b2_prime(y):
    """Derivative of b2 away from 0: F''(F^-1|y|) / F'(F^-1|y|). The limit at
    y = 0 is 0; callers substitute it."""
    y = np.asarray(y, dtype=float)
    if np.any(y == 0.0):
        raise DomainError("b2' closed form needs y != 0 (the limit at 0 is 0)")
    t = np.atleast_1d(F_inv(np.abs(y)))
    out = (F_second(t) / F_prime(t)).reshape(y.shape)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# flow and field on base x R


def fiber_clock(y, t):
    """(phi, psi): fiber position and base time after time t, for y != 0."""
    y = np.asarray(y, dtype=float)
    s = np.sign(y)
    c = F_inv(np.abs(y))
    tc = t + c
    phi = s * F_eval(tc)
    # log log(t + c) - log log c, written to stay accurate for small t
    psi = s * np.log1p(np.log1p(t / c) / np.log(c))
    return phi, psi


def skew_flow(base, t, points) -> np.ndarray:
    """Closed-form flow of the skew product; ``base`` is a SystemSpec with a
    closed-form flow defined for negative times too."""
    pts = np.array(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = pts.copy()
    y = pts[:, -1]
    nz = y != 0.0
    if np.any(nz):
        tt = np.broadcast_to(np.asarray(t, dtype=float), y.shape)[nz]
        phi, psi = fiber_clock(y[nz], tt)
        out[nz, :-1] = base.flow(psi, pts[nz, :-1])
        out[nz, -1] = phi
    return out[0] if single else out


def skew_field(base, points) -> np.ndarray:
    pts = np.array(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    y = pts[:, -1]
    out = np.zeros_like(pts)
    out[:, :-1] = y[:, None] * base.field(pts[:, :-1])
    out[:, -1] = b2(y)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class CounterexampleParams:
    y0: float
    base: object  # SystemSpec of the base flow

    @property
    def c(self) -> float:
        if self.y0 == 0.0:
            raise DomainError("c = F^-1(|y0|) needs y0 != 0")
        return F_inv(abs(self.y0))


def counterexample_flow(params: CounterexampleParams, t: float, x) -> np.ndarray:
    """Image of the point (x, y0) after time t."""
    if np.any(np.asarray(t) < 0):
        from .errors import NegativeTime

        raise NegativeTime("semiflow times are nonnegative")
    x = np.asarray(x, dtype=float).reshape(-1)
    return skew_flow(params.base, t, np.append(x, params.y0))


def counterexample_field(params: CounterexampleParams, p) -> np.ndarray:
    return skew_field(params.base, p)


def field_bound(base, grid_n: int = 10_000, safety: float = 1.05) -> float:
    """max |b~| over a regular grid of about grid_n points of the base space,
    times a safety factor."""
    d = base.space.dim
    per_axis = max(2, int(round(grid_n ** (1.0 / d))))
    axes = [(np.arange(per_axis) + 0.5) / per_axis for _ in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    v = np.asarray(base.field(mesh), dtype=float)
    return safety * float(np.max(np.sqrt(np.sum(v * v, axis=-1))))
