"""Small numerical kernels: safeguarded root finding, Hermite pieces, quadrature."""

from __future__ import annotations

import math
import warnings
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import RootFindingError

ROOT_XTOL = 1e-12
ROOT_MAXITER = 200


def bracketed_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    fprime: Optional[Callable[[float], float]] = None,
    *,
    xtol: float = ROOT_XTOL,
    rtol: float = 0.0,
    maxiter: int = ROOT_MAXITER,
) -> float:
    """Root of ``f`` in ``[lo, hi]`` by bisection, accelerated by Newton steps.

    A Newton step is taken only when ``fprime`` is given and the step stays
    strictly inside the current bracket; otherwise the bracket is halved.
    Terminates when the bracket width drops below ``xtol + rtol*|x|``.
    """
    a, b = float(lo), float(hi)
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if math.isnan(fa) or math.isnan(fb) or (fa > 0) == (fb > 0):
        raise RootFindingError(f"no sign change on [{a!r}, {b!r}]: f={fa!r}, {fb!r}")

    x = 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b = x
        if abs(b - a) <= xtol + rtol * abs(x):
            return 0.5 * (a + b)
        x_next = 0.5 * (a + b)
        if fprime is not None:
            d = fprime(x)
            if d != 0.0 and math.isfinite(d):
                cand = x - fx / d
                if a < cand < b:
                    x_next = cand
                    if abs(cand - x) <= 0.5 * (xtol + rtol * abs(cand)):
                        return cand
        x = x_next
    raise RootFindingError(f"no convergence within {maxiter} iterations on [{lo!r}, {hi!r}]")


def limit_slopes(d0, d1, secant):
    """Fritsch-Carlson limiting of node slopes on one interval.

    Works on scalars or arrays. Slopes with the wrong sign are zeroed and the
    pair is scaled back into the monotonicity circle of radius 3.
    """
    if np.ndim(secant) == 0:
        if secant == 0.0:
            return 0.0, 0.0
        al = max(d0 / secant, 0.0)
        be = max(d1 / secant, 0.0)
        r2 = al * al + be * be
        if r2 > 9.0:
            tau = 3.0 / math.sqrt(r2)
            al *= tau
            be *= tau
        return al * secant, be * secant

    secant = np.asarray(secant, dtype=float)
    flat = secant == 0.0
    safe = np.where(flat, 1.0, secant)
    al = np.maximum(np.asarray(d0) / safe, 0.0)
    be = np.maximum(np.asarray(d1) / safe, 0.0)
    r2 = al * al + be * be
    tau = np.where(r2 > 9.0, 3.0 / np.sqrt(np.maximum(r2, 9.0)), 1.0)
    m0 = np.where(flat, 0.0, al * tau * secant)
    m1 = np.where(flat, 0.0, be * tau * secant)
    return m0, m1


def hermite(t, h, y0, y1, m0, m1):
    """Cubic Hermite value at local coordinate ``t`` in [0, 1] of an interval of width ``h``."""
    t2 = t * t
    t3 = t2 * t
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + t
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1


def adaptive_quad(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    tol: float = 1e-10,
    points: Optional[Sequence[float]] = None,
    limit: int = 2000,
) -> float:
    """Adaptive quadrature of a scalar integrand on ``[a, b]`` to absolute ``tol``."""
    if a == b:
        return 0.0
    pts = None
    if points:
        lo, hi = min(a, b), max(a, b)
        pts = sorted(p for p in points if lo < p < hi) or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _err = integrate.quad(func, a, b, epsabs=tol, epsrel=0.0, limit=limit, points=pts)
    return float(val)


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line through (x, y); returns ``(slope, intercept, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
