"""Macroscopic counterparts of the car-following profile.

Riemann solutions of ``rho_t + f(rho)_x = 0`` with concave ``f``, the
viscous shock ``eps W' = f(W) - f_bar`` and its variant with the
density-dependent viscosity ``eps(W) = -(V ell / 2) phi'(W)``, plus the
distances used to compare them with a computed profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import adaptive_quad
from .errors import DomainError, ProblemError
from .model import ModelParams, rho_star

CONJUGATE_TOL = 1e-10
BISECT_ITERS = 100


@dataclass(frozen=True)
class RiemannSolution:
    """``kind`` is ``"shock"``, ``"rarefaction"`` or ``"constant"``.

    ``speed`` is the jump speed of a shock; ``fan`` the characteristic speeds
    ``(f'(rho_l), f'(rho_r))`` bounding a rarefaction.
    """

    kind: str
    rho_l: float
    rho_r: float
    speed: float = float("nan")
    fan: tuple[float, float] = (float("nan"), float("nan"))


def _check_state(rho: float) -> float:
    if not (0.0 <= rho <= 1.0):
        raise DomainError(f"density {rho!r} outside [0, 1]")
    return float(rho)


def jump_speed(params: ModelParams, rho_l: float, rho_r: float) -> float:
    """``(f(rho_l) - f(rho_r)) / (rho_l - rho_r)``."""
    if rho_l == rho_r:
        raise DomainError("jump speed needs distinct states")
    return (float(params.flux(rho_l)) - float(params.flux(rho_r))) / (rho_l - rho_r)


def riemann_solve(params: ModelParams, rho_l: float, rho_r: float) -> RiemannSolution:
    rho_l, rho_r = _check_state(rho_l), _check_state(rho_r)
    if rho_l == rho_r:
        return RiemannSolution("constant", rho_l, rho_r)
    if rho_l < rho_r:
        return RiemannSolution("shock", rho_l, rho_r, speed=jump_speed(params, rho_l, rho_r))
    fan = (float(params.dflux(rho_l)), float(params.dflux(rho_r)))
    return RiemannSolution("rarefaction", rho_l, rho_r, fan=fan)


def _inverse_dflux(params: ModelParams, xi: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # f' is decreasing on [lo, hi]; bisect f'(rho) = xi for every entry at once
    a = np.full_like(xi, lo)
    b = np.full_like(xi, hi)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (a + b)
        right = params.dflux(mid) > xi
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
        if np.all(b - a <= 1e-15):
            break
    return 0.5 * (a + b)


def riemann_eval(params: ModelParams, rho_l: float, rho_r: float, xi):
    """Density at similarity coordinate ``xi = x / t`` (scalar or array).

    A shock takes the right state at ``xi == speed``.
    """
    sol = riemann_solve(params, rho_l, rho_r)
    xa = np.asarray(xi, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if sol.kind == "constant":
        out = np.full_like(xa, sol.rho_l)
    elif sol.kind == "shock":
        out = np.where(xa < sol.speed, sol.rho_l, sol.rho_r)
    else:
        lo_xi, hi_xi = sol.fan
        out = np.where(xa <= lo_xi, sol.rho_l, sol.rho_r).astype(float)
        inside = (xa > lo_xi) & (xa < hi_xi)
        if np.any(inside):
            out[inside] = _inverse_dflux(params, xa[inside], sol.rho_r, sol.rho_l)
    return float(out[0]) if scalar else out


class SampledProfile:
    """Profile known at sorted sample points; linear interpolation in between, flat outside."""

    def __init__(self, x, values, rho_minus: float, rho_plus: float):
        self.x = np.asarray(x, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.rho_minus = float(rho_minus)
        self.rho_plus = float(rho_plus)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.interp(xa, self.x, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, x) -> np.ndarray:
        return np.asarray(self(np.asarray(x, dtype=float)), dtype=float)

    def slope_at_zero(self) -> float:
        k = int(np.argmin(np.abs(self.x)))
        k = min(max(k, 1), self.x.size - 2)
        return float((self.values[k + 1] - self.values[k - 1]) / (self.x[k + 1] - self.x[k - 1]))


def _check_pair(params: ModelParams, rho_minus: float, rho_plus: float) -> tuple[float, float]:
    rs = rho_star(params).rho_star
    if not (0.0 <= rho_minus < rs < rho_plus <= 1.0):
        raise ProblemError(f"need rho_minus < rho*={rs:.12g} < rho_plus, got ({rho_minus!r}, {rho_plus!r})")
    fbar = float(params.flux(rho_minus))
    if abs(fbar - float(params.flux(rho_plus))) >= CONJUGATE_TOL:
        raise ProblemError(f"boundary states ({rho_minus!r}, {rho_plus!r}) do not carry equal flux")
    return rs, fbar


def integrate_from_center(rhs: Callable[[float], float], x, w0: float, h_max: float) -> np.ndarray:
    """Fixed-step RK4 for the autonomous ODE ``W' = rhs(W)`` with ``W(0) = w0``.

    Marches outward from ``x = 0`` through the sorted points ``x`` in both
    directions, taking as many equal substeps between consecutive points as
    ``h_max`` requires.
    """
    xs = np.asarray(x, dtype=float)
    if xs.ndim != 1 or np.any(np.diff(xs) < 0):
        raise DomainError("sample points must be a sorted 1-d array")
    out = np.empty_like(xs)

    def march(indices):
        cur, w = 0.0, w0
        for i in indices:
            span = xs[i] - cur
            n = max(int(math.ceil(abs(span) / h_max)), 1) if span != 0.0 else 0
            if n:
                h = span / n
                for _ in range(n):
                    k1 = rhs(w)
                    k2 = rhs(w + 0.5 * h * k1)
                    k3 = rhs(w + 0.5 * h * k2)
                    k4 = rhs(w + h * k3)
                    w = w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            cur = xs[i]
            out[i] = w

    right = np.flatnonzero(xs >= 0.0)
    left = np.flatnonzero(xs < 0.0)[::-1]
    march(right)
    march(left)
    return out


def viscous_profile(params: ModelParams, rho_minus: float, rho_plus: float, epsilon: float, x) -> SampledProfile:
    """Stationary viscous shock ``eps W' = f(W) - f_bar`` with ``W(0) = rho*``."""
    if not epsilon > 0.0:
        raise DomainError("viscosity must be positive")
    rs, fbar = _check_pair(params, rho_minus, rho_plus)
    flux = params.flux
    rhs = lambda w: (float(flux(w)) - fbar) / epsilon  # noqa: E731
    h_max = 0.05 * epsilon / params.V
    return SampledProfile(x, integrate_from_center(rhs, x, rs, h_max), rho_minus, rho_plus)


def continuum2_profile(params: ModelParams, rho_minus: float, rho_plus: float, x) -> SampledProfile:
    """Profile of ``W' = (f(W) - f_bar) / eps(W)`` with ``eps(W) = -(V ell / 2) phi'(W)``."""
    rs, fbar = _check_pair(params, rho_minus, rho_plus)
    law, flux = params.law, params.flux
    scale = 0.5 * params.V * params.ell
    lo, hi = min(rho_minus, rho_plus), max(rho_minus, rho_plus)
    probe = np.linspace(lo, hi, 257)
    dphi = np.asarray(law.dphi(probe), dtype=float)
    if np.any(dphi >= 0.0):
        raise ProblemError("the density-dependent viscosity needs phi' < 0 between the end states")

    def rhs(w: float) -> float:
        return (float(flux(w)) - fbar) / (-scale * float(law.dphi(w)))

    eps_min = scale * float(np.min(-dphi))
    h_max = 0.05 * eps_min / params.V
    return SampledProfile(x, integrate_from_center(rhs, x, rs, h_max), rho_minus, rho_plus)


def _breakpoints(*profiles) -> list[float]:
    pts = []
    for p in profiles:
        jump = getattr(p, "x_jump", None)
        if jump is not None:
            pts.append(float(jump))
        grid = getattr(p, "grid", None)
        if grid is not None:
            pts.append(float(grid[-1]))
    return pts


def l1_distance(a, b, window: tuple[float, float] = (-10.0, 10.0), tol: float = 1e-8) -> float:
    """``int |a - b| dx`` over ``window`` by adaptive quadrature, absolute tolerance ``tol``."""
    lo, hi = window
    if not hi > lo:
        raise DomainError("window must have positive length")
    pts = [p for p in _breakpoints(a, b) if lo < p < hi]
    return adaptive_quad(lambda x: abs(float(a(x)) - float(b(x))), lo, hi, tol=tol, points=pts or None)


def sup_distance(a, b, x) -> float:
    xs = np.asarray(x, dtype=float)
    return float(np.max(np.abs(np.asarray(a(xs), dtype=float) - np.asarray(b(xs), dtype=float))))


@dataclass(frozen=True)
class MacroComparison:
    ell: float
    l1_step: float
    sup_viscous: float
    sup_continuum2: float


def window_nodes(curve, window: tuple[float, float]) -> np.ndarray:
    """Grid nodes of a computed profile inside ``window`` (falls back to a uniform grid)."""
    grid = getattr(curve, "grid", None)
    lo, hi = window
    if grid is None:
        return np.linspace(lo, hi, 4001)
    return grid[(grid >= lo) & (grid <= hi)]


def compare_profile(
    curve,
    rho_minus: float,
    rho_plus: float,
    window: tuple[float, float] = (-10.0, 10.0),
    epsilon: Optional[float] = None,
) -> MacroComparison:
    """Distances of a normalized computed profile to the shock step and the viscous references.

    The step jumps from ``rho_minus`` to ``rho_plus`` at ``x = 0``. The sup
    distances are taken over the profile's own grid nodes in the window.
    """
    from .bvp import StepProfile

    params = curve.params
    eps = 0.5 * params.V * params.ell if epsilon is None else epsilon
    xs = window_nodes(curve, window)
    visc = viscous_profile(params, rho_minus, rho_plus, eps, xs)
    cont = continuum2_profile(params, rho_minus, rho_plus, xs)
    step = StepProfile(params, rho_minus, rho_plus, 0.0)
    w = curve.sample(xs)
    return MacroComparison(
        params.ell,
        l1_distance(curve, step, window),
        float(np.max(np.abs(w - visc.values))),
        float(np.max(np.abs(w - cont.values))),
    )


def compare_rows(curve, rho_minus: float, rho_plus: float, x: Sequence[float], epsilon: Optional[float] = None):
    from .bvp import StepProfile

    params = curve.params
    xs = np.asarray(x, dtype=float)
    eps = 0.5 * params.V * params.ell if epsilon is None else epsilon
    visc = viscous_profile(params, rho_minus, rho_plus, eps, xs)
    cont = continuum2_profile(params, rho_minus, rho_plus, xs)
    step = StepProfile(params, rho_minus, rho_plus, 0.0)
    return zip(xs, curve.sample(xs), visc.values, cont.values, step.sample(xs))


def write_compare_csv(path, curve, rho_minus: float, rho_plus: float, x, epsilon: Optional[float] = None) -> None:
    from .io import write_csv

    write_csv(path, ["x", "W_dde", "W_viscous", "W_continuum2", "W_step"], compare_rows(curve, rho_minus, rho_plus, x, epsilon))
