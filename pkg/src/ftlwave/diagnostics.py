"""Distance of a car distribution from a profile, and the stability experiment.

A distribution is bracketed by two horizontal shifts of a monotone profile
``W``: ``h_plus`` is the largest shift with ``rho_i <= W(z_i - h)`` for every
car and ``h_minus`` the smallest with ``rho_i >= W(z_i - h)``. Because ``W``
is increasing, car ``i`` alone allows exactly the shifts
``h <= z_i - W^{-1}(rho_i)``, so both envelopes are extrema of that quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._numerics import hermite, linear_fit
from .errors import DomainError, PreconditionError, StateError
from .profile import ProfileCurve
from .rates import RateReport
from .simulator import LeaderRule, Platoon, generate_distribution, simulate

DEFAULT_MARGIN = 1e-6
INVERSE_TOL = 1e-12
GAP_SLACK = 1e-8
# cars that start on the flat left end inherit the plateau cut as a density
# error; the stability experiment needs it well below the margin
STABILITY_PLATEAU_TOL = 1e-12


def _require_curve(curve) -> ProfileCurve:
    if not isinstance(curve, ProfileCurve):
        raise DomainError("a sampled profile curve is required (step and constant profiles have no inverse)")
    return curve


def profile_inverse(curve: ProfileCurve, rho, margin: float = DEFAULT_MARGIN):
    """Position ``x`` with ``W(x) = rho`` (scalar or array).

    Values must lie in ``[W(-inf) + margin, rho_plus - margin]``. Above the
    last grid value the analytic tail is inverted in closed form; otherwise the
    enclosing Hermite segment is bisected to ``1e-12`` in ``x``.
    """
    curve = _require_curve(curve)
    ra = np.asarray(rho, dtype=float)
    scalar = ra.ndim == 0
    ra = np.atleast_1d(ra)
    lo, hi = curve.left_limit + margin, curve.rho_plus - margin
    if not (lo <= hi) or np.any(ra < lo) or np.any(ra > hi) or not np.all(np.isfinite(ra)):
        bad = ra[(ra < lo) | (ra > hi) | ~np.isfinite(ra)]
        shown = bad[0] if bad.size else float("nan")
        raise DomainError(f"density {shown!r} outside the invertible range [{lo!r}, {hi!r}]")

    vals = curve.values
    out = np.empty_like(ra)
    in_tail = ra >= vals[-1]
    if np.any(in_tail):
        tail = curve.tail
        out[in_tail] = tail.x_hat - np.log((tail.rho_plus - ra[in_tail]) / tail.amplitude) / tail.rate
    body = ~in_tail
    if np.any(body):
        r = ra[body]
        k = np.searchsorted(vals, r, side="right") - 1
        k = np.clip(k, 0, vals.size - 2)
        # flat stretches: step right until the segment actually contains r
        while True:
            move = (vals[k + 1] < r) & (k < vals.size - 2)
            if not np.any(move):
                break
            k = np.where(move, k + 1, k)
        w = curve._widths[k]
        y0, y1 = vals[k], vals[k + 1]
        m0, m1 = curve._m0[k], curve._m1[k]
        a = np.zeros_like(r)
        b = np.ones_like(r)
        n_iter = int(math.ceil(math.log2(max(float(np.max(w)), INVERSE_TOL) / INVERSE_TOL))) + 2
        for _ in range(n_iter):
            mid = 0.5 * (a + b)
            below = hermite(mid, w, y0, y1, m0, m1) < r
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out[body] = curve.grid[k] + 0.5 * (a + b) * w
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class EnvelopePair:
    h_plus: float
    h_minus: float
    contributing: np.ndarray

    @property
    def gap(self) -> float:
        return self.h_minus - self.h_plus


def car_shifts(platoon: Platoon, curve: ProfileCurve, margin: float = DEFAULT_MARGIN) -> tuple[np.ndarray, np.ndarray]:
    """Indices of admissible cars and their shifts ``z_i - W^{-1}(rho_i)``.

    Cars with density within ``margin`` of either end state are left out;
    the front car has no density and is never included.
    """
    curve = _require_curve(curve)
    rho = platoon.densities()
    lo, hi = curve.left_limit + margin, curve.rho_plus - margin
    idx = np.flatnonzero((rho > lo) & (rho < hi))
    if idx.size == 0:
        return idx, np.empty(0)
    return idx, platoon.positions[idx] - profile_inverse(curve, rho[idx], margin)


def envelope_shifts(platoon: Platoon, curve: ProfileCurve, margin: float = DEFAULT_MARGIN) -> EnvelopePair:
    idx, h = car_shifts(platoon, curve, margin)
    if idx.size == 0:
        raise StateError("no car density lies strictly between the end states; envelopes are undefined")
    return EnvelopePair(float(np.min(h)), float(np.max(h)), idx)


@dataclass
class EnvelopeTrace:
    times: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray
    contributing: list = field(default_factory=list)
    t_p: float = float("nan")

    @property
    def gap(self) -> np.ndarray:
        return self.h_minus - self.h_plus

    def increases(self, slack: float = GAP_SLACK) -> np.ndarray:
        """Saved steps where the gap grew by more than ``slack``."""
        return np.flatnonzero(np.diff(self.gap) > slack) + 1

    def increase_fraction(self, slack: float = GAP_SLACK) -> float:
        n = self.gap.size - 1
        return self.increases(slack).size / n if n > 0 else 0.0

    def non_increasing(self, slack: float = GAP_SLACK) -> bool:
        return self.increases(slack).size == 0

    def increase_breakdown(self, slack: float = GAP_SLACK) -> tuple[int, int]:
        """Gap increases split into (steps where the admissible set changed, steps where it did not)."""
        changed = fixed = 0
        for m in self.increases(slack):
            a, b = self.contributing[m - 1], self.contributing[m]
            if a.shape == b.shape and np.array_equal(a, b):
                fixed += 1
            else:
                changed += 1
        return changed, fixed

    @property
    def reduction(self) -> float:
        """``gap(t_end) / gap(0)``."""
        g0 = self.gap[0]
        return float(self.gap[-1] / g0) if g0 > 0 else float("nan")

    def rows(self):
        for row in zip(self.times, self.h_plus, self.h_minus, self.gap):
            yield tuple(float(v) for v in row)


@dataclass(frozen=True)
class Perturbation:
    """Monotone-preserving spacing perturbation; the rear car stays in place.

    Spacing ``i`` is multiplied by ``1 + amplitude * s_i`` where ``s_i`` is a
    function of ``u = (rho_i - rho_minus) / (rho_plus - rho_minus)``:

    ``bump`` (default): ``4 u (1-u)``. Every car ahead of the bump moves
    forward and the wave relaxes to a shifted position.

    ``balanced``: ``u^2 (1-u)^2 (1-2u)`` scaled to peak 1, with the negative
    lobe rescaled so the summed displacement is zero.

    ``seed`` multiplies each ``s_i`` by an independent ``U(0.5, 1)`` draw
    (before rebalancing).
    """

    amplitude: float = 0.02
    pattern: str = "bump"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.pattern not in ("balanced", "bump"):
            raise DomainError(f"unknown perturbation pattern {self.pattern!r}")
        if not self.amplitude >= 0.0:
            raise DomainError("perturbation amplitude must be nonnegative")

    def weights(self, rho: np.ndarray, rho_minus: float, rho_plus: float, gaps: Optional[np.ndarray] = None) -> np.ndarray:
        u = np.clip((rho - rho_minus) / (rho_plus - rho_minus), 0.0, 1.0)
        if self.pattern == "bump":
            s = 4.0 * u * (1.0 - u)
        else:
            s = u * u * (1.0 - u) ** 2 * (1.0 - 2.0 * u)
        if self.seed is not None:
            rng = np.random.default_rng(self.seed)
            s = s * rng.uniform(0.5, 1.0, size=s.size)
        if self.pattern == "balanced":
            g = np.ones_like(s) if gaps is None else gaps
            pos = np.sum(np.where(s > 0, s, 0.0) * g)
            neg = -np.sum(np.where(s < 0, s, 0.0) * g)
            if pos > 0 and neg > 0:
                s = np.where(s < 0, s * (pos / neg), s)
            peak = np.max(np.abs(s))
            if peak > 0:
                s = s / peak
        return s

    def apply(self, platoon: Platoon, rho_minus: float, rho_plus: float) -> Platoon:
        gaps = np.diff(platoon.positions)
        s = self.weights(platoon.densities(), rho_minus, rho_plus, gaps)
        z = np.concatenate(([platoon.positions[0]], platoon.positions[0] + np.cumsum(gaps * (1.0 + self.amplitude * s))))
        return platoon.with_positions(z)


def is_monotone(platoon: Platoon, tol: float = 1e-12) -> bool:
    """Densities nondecreasing from rear to front, up to roundoff ``tol``."""
    return bool(np.all(np.diff(platoon.densities()) >= -tol))


def covering_platoon(
    curve: ProfileCurve,
    extra_back: int = 0,
    tol: float = 1e-9,
    z0: float = 0.0,
    *,
    params=None,
    leader: Optional[LeaderRule] = None,
) -> Platoon:
    """Generated platoon whose end cars sit within ``tol`` of the end states.

    ``extra_back`` more cars are added behind the rear one, e.g. to feed the
    transition region during a long run. ``params`` and ``leader`` default to
    the curve's parameters and a leader tracing the curve.
    """
    ell = curve.params.ell
    n_fwd = 0
    z = z0
    while curve.rho_plus - float(curve(z)) > tol:
        z += ell / float(curve(z))
        n_fwd += 1
        if n_fwd > 100_000:
            raise StateError("profile does not approach its right state")
    n_back = 0
    z = z0
    while float(curve(z)) - curve.left_limit > tol and z > curve.x_min:
        z -= ell / float(curve(z))
        n_back += 1
    return generate_distribution(curve, z0, n_back + extra_back, n_fwd + 1, params, leader=leader)


def stability_run(
    problem,
    curve: ProfileCurve,
    perturbation: Optional[Perturbation] = Perturbation(),
    t_end: Optional[float] = None,
    dt: Optional[float] = None,
    *,
    n_periods: float = 20.0,
    saves_per_period: int = 10,
    margin: float = DEFAULT_MARGIN,
    platoon: Optional[Platoon] = None,
) -> EnvelopeTrace:
    """Simulate a perturbed profile platoon and record the envelope gap.

    Defaults: ``t_end = n_periods * t_p``, ``dt = ell / (10 V)`` rounded so a
    whole number of steps fits between saves.
    """
    curve = _require_curve(curve)
    params = curve.params
    t_p = problem.t_p
    t_end = n_periods * t_p if t_end is None else float(t_end)
    if platoon is None:
        extra = int(math.ceil(t_end / t_p)) + 5
        base = covering_platoon(curve, extra_back=extra)
        platoon = base if perturbation is None else perturbation.apply(base, curve.left_limit, curve.rho_plus)
    if not is_monotone(platoon):
        raise PreconditionError("initial densities must be nondecreasing from rear to front")
    rho = platoon.densities()
    lo = min(problem.rho_minus, curve.left_limit)
    hi = max(problem.rho_plus, curve.rho_plus)
    if np.any(rho < lo - 1e-12) or np.any(rho > hi + 1e-12):
        raise PreconditionError("initial densities must lie between the end states")
    platoon = Platoon(platoon.positions, params, LeaderRule.trace(curve))

    save_dt = t_p / saves_per_period
    dt_max = 0.1 * params.ell / params.V
    if dt is None:
        per_save = int(math.ceil(save_dt / dt_max))
        dt = save_dt / per_save
    else:
        per_save = max(int(round(save_dt / dt)), 1)
    steps = int(round(t_end / dt))
    traj = simulate(platoon, dt, steps * dt, stride=per_save)

    hp, hm, used = [], [], []
    for m in range(traj.times.size):
        env = envelope_shifts(traj.platoon(m), curve, margin)
        hp.append(env.h_plus)
        hm.append(env.h_minus)
        used.append(env.contributing)
    return EnvelopeTrace(traj.times.copy(), np.array(hp), np.array(hm), used, t_p)


def write_envelopes_csv(path, trace: EnvelopeTrace) -> None:
    from .io import write_csv

    write_csv(path, ["t", "h_plus", "h_minus", "gap"], trace.rows())


@dataclass(frozen=True)
class ShapeReport:
    applicable: bool
    x_bar: Optional[float]
    fitted_plus: float
    fitted_minus: float
    fit_r2_plus: float
    fit_r2_minus: float
    lambda_plus: float
    lambda_minus: float
    asymmetric: bool

    def rate_errors(self) -> tuple[float, float]:
        return (
            abs(self.fitted_plus - self.lambda_plus) / self.lambda_plus,
            abs(self.fitted_minus - self.lambda_minus) / self.lambda_minus,
        )

    def rates_match(self, rel: float = 0.10) -> bool:
        ep, em = self.rate_errors()
        return ep <= rel and em <= rel


def inflection_bound(curve: ProfileCurve, band: float = 1e-6) -> Optional[float]:
    """Smallest ``x_bar >= 0`` with convex nodes on ``x <= -x_bar`` and concave on ``x >= x_bar``.

    Only nodes whose value is more than ``band`` away from both end states
    count; the flat ends carry no resolvable curvature.
    """
    v = curve.values
    if v.size < 3 or curve.rho_plus - curve.left_limit <= 2 * band:
        return None
    g = curve.grid
    # sign of the second divided difference; the grid need not be uniform
    d2 = (v[2:] - v[1:-1]) / (g[2:] - g[1:-1]) - (v[1:-1] - v[:-2]) / (g[1:-1] - g[:-2])
    x = g[1:-1]
    vm = v[1:-1]
    keep = (vm > curve.left_limit + band) & (vm < curve.rho_plus - band)
    x, d2 = x[keep], d2[keep]
    if x.size == 0:
        return None
    bad_right = x[(x >= 0) & (d2 >= 0)]
    bad_left = x[(x <= 0) & (d2 <= 0)]
    xb = 0.0
    if bad_right.size:
        xb = max(xb, float(bad_right.max()))
    if bad_left.size:
        xb = max(xb, float(-bad_left.min()))
    return xb


def fitted_tail_rates(
    curve: ProfileCurve,
    window: tuple[float, float] = (1e-6, 1e-3),
) -> tuple[float, float, float, float]:
    """Log-linear fits of the two tails on grid nodes: ``(lam_plus, r2_plus, lam_minus, r2_minus)``.

    Right: ``log(rho_plus - W)`` against ``x`` where the distance lies in
    ``window``; left: ``log(W - W(-inf))`` likewise. The imposed analytic tail
    right of the last node is not used.
    """
    lo, hi = window
    x = curve.grid
    v = curve.values
    dp = curve.rho_plus - v
    sel = (dp >= lo) & (dp <= hi)
    lam_p = r2_p = float("nan")
    if np.count_nonzero(sel) >= 3:
        slope, _, r2_p = linear_fit(x[sel], np.log(dp[sel]))
        lam_p = -slope
    dm = v - curve.left_limit
    sel = (dm >= lo) & (dm <= hi)
    lam_m = r2_m = float("nan")
    if np.count_nonzero(sel) >= 3:
        slope, _, r2_m = linear_fit(x[sel], np.log(dm[sel]))
        lam_m = slope
    return lam_p, r2_p, lam_m, r2_m


def shape_checks(curve, rates: RateReport, window: tuple[float, float] = (1e-6, 1e-3)) -> ShapeReport:
    lp, lm = rates.lambda_plus, rates.lambda_minus
    if not isinstance(curve, ProfileCurve) or curve.rho_plus - curve.left_limit <= 1e-12:
        return ShapeReport(False, None, float("nan"), float("nan"), float("nan"), float("nan"), lp, lm, lm < lp)
    xb = inflection_bound(curve)
    fp, r2p, fm, r2m = fitted_tail_rates(curve, window)
    return ShapeReport(True, xb, fp, fm, r2p, r2m, lp, lm, bool(fm < fp and lm < lp))
