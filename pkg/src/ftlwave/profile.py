"""Discrete traveling-wave profiles: dense representation and the backward DDE solver.

A profile ``W`` satisfies the advanced-argument equation

    W'(x) = W^2 / (ell * phi(W)) * [phi(W(x)) - phi(W(x + ell / W(x)))]

and is computed backward in ``x`` from data prescribed on ``[x_hat, inf)``.
Because ``ell / W >= ell``, every lookup of the advanced argument lands at
least ``ell - h`` to the right of the current step, so a fixed-step explicit
scheme only ever reads already-computed values (method of steps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._numerics import adaptive_quad, bracketed_root, hermite, limit_slopes
from .errors import DomainError, InconsistencyError, InvariantError, StateError, StepSizeError
from .model import ModelParams, rho_star

MONOTONE_TOL = 1e-10
DEFAULT_PLATEAU_TOL = 1e-9


@dataclass(frozen=True)
class RightTail:
    """Exponential data ``rho_plus - amplitude * exp(-rate * (x - x_hat))`` for ``x >= x_hat``."""

    rho_plus: float
    amplitude: float
    rate: float
    x_hat: float

    @classmethod
    def from_delta(cls, rho_plus: float, delta: float, rate: float, x_hat: float) -> "RightTail":
        """Tail written as ``rho_plus - delta * exp(-rate * x)``."""
        return cls(rho_plus, delta * math.exp(-rate * x_hat), rate, x_hat)

    @property
    def delta(self) -> float:
        return self.amplitude * math.exp(self.rate * self.x_hat)

    def __call__(self, x):
        return self.rho_plus - self.amplitude * np.exp(-self.rate * (np.asarray(x, dtype=float) - self.x_hat))

    def value(self, x: float) -> float:
        return self.rho_plus - self.amplitude * math.exp(-self.rate * (x - self.x_hat))

    def shifted(self, s: float) -> "RightTail":
        return replace(self, x_hat=self.x_hat + s)


class ProfileCurve:
    """Monotone profile sampled on a grid ending at the tail anchor.

    The grid is uniform except for a few inserted nodes at derivative
    breaking points; ``h`` is the nominal spacing.

    Between nodes the curve is a cubic Hermite interpolant whose node slopes
    (the DDE right-hand side) are Fritsch-Carlson limited, so the dense
    output is monotone wherever the samples are. Right of the last node the
    analytic tail is used; left of the first node the curve is the constant
    ``left_limit``.
    """

    def __init__(
        self,
        params: ModelParams,
        grid,
        values,
        slopes,
        tail: RightTail,
        left_limit: Optional[float] = None,
        *,
        plateau: bool = False,
    ):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or values.shape != grid.shape or slopes.shape != grid.shape:
            raise DomainError("profile needs at least two nodes with matching values and slopes")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("profile grid must be strictly increasing")
        self.params = params
        self.grid = grid
        self.values = values
        self.slopes = slopes
        self.tail = tail
        self.left_limit = float(values[0] if left_limit is None else left_limit)
        self.plateau = plateau
        widths = np.diff(grid)
        self.h = float(np.median(widths))
        secant = np.diff(values) / widths
        self._widths = widths
        self._m0, self._m1 = limit_slopes(slopes[:-1], slopes[1:], secant)
        for arr in (self.grid, self.values, self.slopes, self._m0, self._m1, self._widths):
            arr.setflags(write=False)

    @classmethod
    def constant(cls, params: ModelParams, rho: float, x_lo: float = -1.0, x_hi: float = 0.0) -> "ProfileCurve":
        return cls(
            params,
            [x_lo, x_hi],
            [rho, rho],
            [0.0, 0.0],
            RightTail(rho, 0.0, 0.0, x_hi),
            rho,
            plateau=True,
        )

    @property
    def x_hat(self) -> float:
        return float(self.grid[-1])

    @property
    def x_min(self) -> float:
        return float(self.grid[0])

    @property
    def rho_plus(self) -> float:
        return self.tail.rho_plus

    @property
    def rho_minus(self) -> float:
        return self.left_limit

    def evaluate(self, x):
        """Profile value at ``x`` (scalar or array)."""
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        out = np.empty_like(xa)

        g = self.grid
        n = g.size
        right = xa >= g[-1]
        left = xa < g[0]
        mid = ~(right | left)

        if np.any(right):
            out[right] = self.tail(xa[right])
        if np.any(left):
            out[left] = self.left_limit
        if np.any(mid):
            xm = xa[mid]
            k = np.searchsorted(g, xm, side="right") - 1
            k = np.clip(k, 0, n - 2)
            w = self._widths[k]
            t = (xm - g[k]) / w
            out[mid] = hermite(t, w, self.values[k], self.values[k + 1], self._m0[k], self._m1[k])
        return float(out[0]) if scalar else out

    __call__ = evaluate

    def translate(self, s: float) -> "ProfileCurve":
        """Curve ``x -> W(x - s)``."""
        return ProfileCurve(
            self.params,
            self.grid + s,
            self.values,
            self.slopes,
            self.tail.shifted(s),
            self.left_limit,
            plateau=self.plateau,
        )

    def sample(self, x) -> np.ndarray:
        return np.asarray(self.evaluate(np.asarray(x, dtype=float)), dtype=float)

    def __repr__(self) -> str:
        return (
            f"ProfileCurve(n={self.grid.size}, x=[{self.x_min:.6g}, {self.x_hat:.6g}], "
            f"W=[{self.values[0]:.9g}, {self.values[-1]:.9g}], rho_plus={self.rho_plus:.6g})"
        )


@dataclass(frozen=True)
class SolveReport:
    x_min: float
    plateau: bool
    left_limit: float
    violations: int
    t_p: float
    steps: int


def rhs_eval(curve: ProfileCurve, x: float, w: float) -> float:
    """Right-hand side of the profile DDE at ``(x, w)`` with ``W`` read from ``curve``."""
    params = curve.params
    if not (0.0 < w <= 1.0):
        raise DomainError(f"trial value must lie in (0, 1], got {w!r}")
    pw = float(params.law.phi(w))
    if pw <= 0.0:
        raise InvariantError(f"phi(w) = {pw!r} vanishes; the DDE is singular at w = {w!r}")
    xa = x + params.ell / w
    if xa < curve.x_min:
        raise DomainError(f"advanced point {xa!r} lies left of the evaluable domain")
    wa = curve.evaluate(xa)
    return w * w / (params.ell * pw) * (pw - float(params.law.phi(wa)))


def period_quadrature(curve, x: float, params: Optional[ModelParams] = None, tol: float = 1e-10) -> float:
    """Travel time from ``x`` to ``x + ell / W(x)`` at speed ``V phi(W)``."""
    params = params or curve.params
    w0 = float(curve(x))
    spacing = params.ell / w0
    law, V = params.law, params.V
    pts = None
    grid = getattr(curve, "grid", None)
    if grid is not None and grid[0] < x + spacing and grid[-1] > x:
        pts = [float(grid[-1])]
    return adaptive_quad(lambda z: 1.0 / (V * float(law.phi(curve(z)))), x, x + spacing, tol=tol, points=pts)


def solve_backward(
    params: ModelParams,
    tail: RightTail,
    *,
    h: Optional[float] = None,
    x_min: Optional[float] = None,
    plateau_tol: Optional[float] = DEFAULT_PLATEAU_TOL,
    max_steps: int = 2_000_000,
) -> tuple[ProfileCurve, SolveReport]:
    """Integrate the profile DDE backward from ``tail.x_hat`` with classical RK4.

    Stops at ``x_min`` or once ``|W(x) - W(x + ell)| < plateau_tol`` has held
    at every node of one full ``ell``-interval. ``plateau_tol=None`` disables
    the plateau stop. Default step is ``ell/128``, default ``x_min`` is
    ``x_hat - 1000 ell``.

    The tail generally meets the solution with a kink at ``x_hat``. The kink
    comes back as a jump in the second derivative where the advanced argument
    ``x + ell/W(x)`` crosses ``x_hat``, and as a jump in the third derivative
    one crossing later. Steps are split at those two points, which are kept as
    extra grid nodes; later crossings are smooth enough for fourth order.
    """
    ell = params.ell
    law = params.law
    h = ell / 128.0 if h is None else float(h)
    if not (0.0 < h <= ell / 64.0 * (1 + 1e-12)):
        raise DomainError(f"space step must satisfy 0 < h <= ell/64, got {h!r}")
    xh = float(tail.x_hat)
    x_min = xh - 1000.0 * ell if x_min is None else float(x_min)
    if not x_min < xh:
        raise DomainError("x_min must lie left of x_hat")
    w0 = tail.value(xh)
    if not (0.0 < w0 < 1.0 and 0.0 < tail.rho_plus < 1.0):
        raise DomainError(f"tail values must lie in (0, 1), got W(x_hat)={w0!r}, rho_plus={tail.rho_plus!r}")
    if float(law.phi(tail.rho_plus)) <= 0.0:
        raise DomainError("phi vanishes at rho_plus; use the step-profile constructor")

    ws = [w0]
    ds: list[float] = []
    lim0: list[float] = []
    lim1: list[float] = []
    # cell k -> (x_b, w_b, d_b, left subcell slopes, right subcell slopes)
    extra: dict[int, tuple] = {}
    rp, amp, rate = tail.rho_plus, tail.amplitude, tail.rate
    phi = law.phi
    linear = law.is_linear
    off = law.offset
    exp = math.exp
    inv_h = 1.0 / h

    def lookup(x: float) -> float:
        if x >= xh:
            return rp - amp * exp(-rate * (x - xh))
        u = (xh - x) * inv_h
        k = int(u)
        if k >= len(lim0):
            raise DomainError(f"advanced point {x!r} not yet computed")
        if extra and k in extra:
            xb, wb, _, (ml0, ml1), (mr0, mr1) = extra[k]
            xk = xh - k * h
            if x >= xb:
                return hermite((x - xb) / (xk - xb), xk - xb, wb, ws[k], mr0, mr1)
            xk1 = xh - (k + 1) * h
            return hermite((x - xk1) / (xb - xk1), xb - xk1, ws[k + 1], wb, ml0, ml1)
        t = (k + 1) - u
        y0 = ws[k + 1]
        y1 = ws[k]
        m0 = lim0[k]
        m1 = lim1[k]
        t2 = t * t
        t3 = t2 * t
        return (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1

    def rhs(x: float, w: float) -> float:
        if not (0.0 < w <= 1.0):
            raise InvariantError(f"W left (0, 1] at x={x!r}: {w!r}")
        wa = lookup(x + ell / w)
        if linear:
            pw = 1.0 - w - off
            if pw <= 0.0:
                raise InvariantError(f"phi(W) vanished at x={x!r}")
            return w * w / (ell * pw) * (wa - w)
        pw = float(phi(w))
        if pw <= 0.0:
            raise InvariantError(f"phi(W) vanished at x={x!r}")
        return w * w / (ell * pw) * (pw - float(phi(wa)))

    def rk4(x: float, w: float, s: float, k1: float) -> float:
        half = 0.5 * s
        k2 = rhs(x - half, w - half * k1)
        k3 = rhs(x - half, w - half * k2)
        k4 = rhs(x - s, w - s * k3)
        return w - s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def split_at(x: float, w: float, k1: float, b: float, f_lo: float, f_hi: float) -> tuple[float, float]:
        # substep s in (0, h) with (x - s) + ell / W(x - s) = b; Illinois variant of regula falsi
        lo, hi = 0.0, h
        s, wb = 0.5 * h, w
        side = 0
        for _ in range(80):
            s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            wb = rk4(x, w, s, k1)
            fs = (x - s) + ell / wb - b
            if fs == 0.0 or abs(fs) < 1e-15 * ell:
                break
            if fs > 0.0:
                lo, f_lo = s, fs
                if side == 1:
                    f_hi *= 0.5
                side = 1
            else:
                hi, f_hi = s, fs
                if side == -1:
                    f_lo *= 0.5
                side = -1
            if hi - lo < 1e-15 * h:
                break
        return s, wb

    ds.append(rhs(xh, w0))
    violations = 0
    plateau = False
    run = 0
    need = int(math.ceil(ell * inv_h))
    pending = [(xh, 0)]
    k = 0
    w = w0
    while k < max_steps:
        x = xh - k * h
        x_next = xh - (k + 1) * h
        if x_next < x_min - 1e-12 * max(1.0, abs(x_min)):
            break
        k1 = ds[k]
        wn = rk4(x, w, h, k1)
        split = None
        if pending and math.isfinite(wn) and 0.0 < wn <= 1.0:
            b, gen = pending[0]
            a_cur = x + ell / w
            a_next = x_next + ell / wn
            if a_next < b <= a_cur:
                pending.pop(0)
                if a_cur - b <= 1e-9 * h:
                    xb = x
                elif b - a_next <= 1e-9 * h:
                    xb = x_next
                else:
                    s, wb = split_at(x, w, k1, b, a_cur - b, a_next - b)
                    xb = x - s
                    db = rhs(xb, wb)
                    wn = rk4(xb, wb, h - s, db)
                    split = (xb, wb, db)
                if gen < 1:
                    pending.append((xb, gen + 1))
        if not math.isfinite(wn) or wn <= 0.0 or wn > 1.0:
            raise InvariantError(f"W left (0, 1] at x={x_next!r}: {wn!r}")
        if wn > w:
            if wn - w > MONOTONE_TOL:
                raise StepSizeError(
                    f"monotonicity lost at x={x_next!r} (W rose by {wn - w:.3e}); reduce h"
                )
            violations += 1
        ws.append(wn)
        ds.append(rhs(x_next, wn))
        if split is None:
            m0, m1 = limit_slopes(ds[k + 1], ds[k], (w - wn) * inv_h)
        else:
            xb, wb, db = split
            left = limit_slopes(ds[k + 1], db, (wb - wn) / (xb - x_next))
            right = limit_slopes(db, ds[k], (w - wb) / (x - xb))
            extra[k] = (xb, wb, db, left, right)
            m0, m1 = left[0], right[1]
        lim0.append(m0)
        lim1.append(m1)
        k += 1
        w = wn
        if plateau_tol is not None:
            if abs(lookup(x_next + ell) - wn) < plateau_tol:
                run += 1
                if run >= need:
                    plateau = True
                    break
            else:
                run = 0

    if k == 0:
        raise DomainError("x_min is closer to x_hat than one step")
    n = len(ws)
    grid = xh - h * np.arange(n - 1, -1, -1, dtype=float)
    grid[-1] = xh
    vals = np.array(ws[::-1])
    slopes = np.array(ds[::-1])
    if extra:
        # cell k lies between reversed positions n - 2 - k and n - 1 - k
        cells = sorted(extra)
        pos = [n - 1 - c for c in cells]
        grid = np.insert(grid, pos, [extra[c][0] for c in cells])
        vals = np.insert(vals, pos, [extra[c][1] for c in cells])
        slopes = np.insert(slopes, pos, [extra[c][2] for c in cells])
    curve = ProfileCurve(params, grid, vals, slopes, tail, ws[-1], plateau=plateau)
    t_p = period_quadrature(curve, curve.x_min)
    left_root = _lower_root_from_period(params, t_p) if plateau else float("nan")
    report = SolveReport(curve.x_min, plateau, left_root, violations, t_p, k)
    return curve, report


def _lower_root_from_period(params: ModelParams, t_p: float) -> float:
    info = rho_star(params)
    target = params.ell / t_p
    if target > info.f_star * (1 + 1e-12):
        raise InconsistencyError(f"ell/t_p = {target!r} exceeds the peak flux {info.f_star!r}")
    target = min(target, info.f_star)
    g = lambda r: float(params.flux(r)) - target  # noqa: E731
    if g(info.rho_star) == 0.0:
        return info.rho_star
    return bracketed_root(g, 0.0, info.rho_star, lambda r: float(params.dflux(r)))


def left_limit_estimate(curve: ProfileCurve, params: Optional[ModelParams] = None) -> float:
    """Left limit from the period: lower root of ``f(rho) = ell / t_p``.

    ``t_p`` is the travel time over the last car spacing resolved at the
    plateau; the period is the same for every car on a DDE solution.
    """
    params = params or curve.params
    if not curve.plateau:
        raise StateError("profile did not reach a plateau; the left limit is not resolved")
    return _lower_root_from_period(params, period_quadrature(curve, curve.x_min, params))


def write_profile_csv(path, curve, x=None) -> None:
    """Write ``x,W`` rows with 17 significant digits (grid nodes by default)."""
    from .io import write_csv

    xs = curve.grid if x is None else np.asarray(x, dtype=float)
    write_csv(path, ["x", "W"], zip(xs, curve.sample(xs)))
