"""Two-point boundary-value profiles as limits of backward solves.

For boundary densities ``rho_minus < rho* < rho_plus`` with equal flux, the
profile is approached by solving backward from exponential data
``rho_plus - delta exp(-lambda_plus x)`` imposed on ``[x_hat_n, inf)`` for an
increasing anchor sequence. Each solve plateaus at some ``rho_{-,n}``; the
sequence converges to ``rho_minus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._numerics import bracketed_root, linear_fit
from .errors import DomainError, ProblemError, UnsupportedError
from .model import ModelParams, conjugate_density, rho_star
from .profile import DEFAULT_PLATEAU_TOL, ProfileCurve, RightTail, SolveReport, solve_backward
from .rates import lambda_plus

CONJUGATE_TOL = 1e-10
DEFAULT_BVP_TOL = 1e-6
DEFAULT_DELTA0 = 0.2
DEFAULT_N_ANCHORS = 8


@dataclass(frozen=True)
class BvpProblem:
    params: ModelParams
    rho_minus: float
    rho_plus: float

    def __post_init__(self):
        info = rho_star(self.params)
        rm, rp = self.rho_minus, self.rho_plus
        tol = 1e-12
        if not (-tol <= rm <= info.rho_star + tol and info.rho_star - tol <= rp <= 1.0 + tol):
            raise ProblemError(
                f"need 0 <= rho_minus <= rho*={info.rho_star:.12g} <= rho_plus <= 1, got ({rm!r}, {rp!r})"
            )
        if abs(float(self.params.flux(rm)) - float(self.params.flux(rp))) >= CONJUGATE_TOL:
            raise ProblemError(f"boundary states ({rm!r}, {rp!r}) do not carry equal flux")

    @classmethod
    def from_left(cls, params: ModelParams, rho_minus: float) -> "BvpProblem":
        return cls(params, rho_minus, conjugate_density(params, rho_minus))

    @property
    def rho_star(self) -> float:
        return rho_star(self.params).rho_star

    @property
    def f_bar(self) -> float:
        return float(self.params.flux(self.rho_minus))

    @property
    def t_p(self) -> float:
        """Period ``ell / f_bar``."""
        return self.params.ell / self.f_bar

    @property
    def is_constant(self) -> bool:
        rs = self.rho_star
        return abs(self.rho_minus - rs) < 1e-12 and abs(self.rho_plus - rs) < 1e-12

    @property
    def is_step(self) -> bool:
        return self.rho_minus <= 0.0 or self.rho_plus >= 1.0


class StepProfile:
    """Step from ``lo`` (x < x_jump) to ``hi`` (x >= x_jump)."""

    def __init__(self, params: ModelParams, lo: float = 0.0, hi: float = 1.0, x_jump: float = 0.0):
        self.params = params
        self.lo = float(lo)
        self.hi = float(hi)
        self.x_jump = float(x_jump)
        self.left_limit = self.lo
        self.plateau = True

    @property
    def rho_minus(self) -> float:
        return self.lo

    @property
    def rho_plus(self) -> float:
        return self.hi

    def evaluate(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa < self.x_jump, self.lo, self.hi)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def translate(self, s: float) -> "StepProfile":
        return StepProfile(self.params, self.lo, self.hi, self.x_jump + s)

    def sample(self, x) -> np.ndarray:
        return np.asarray(self.evaluate(np.asarray(x, dtype=float)), dtype=float)


@dataclass
class SequenceRecord:
    x_hat: list[float] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    rho_minus_n: list[float] = field(default_factory=list)
    t_p_n: list[float] = field(default_factory=list)
    reports: list[SolveReport] = field(default_factory=list)
    rho_minus: float = float("nan")
    t_p: float = float("nan")
    lambda_plus: float = float("nan")
    converged: bool = False
    converged_at: Optional[int] = None
    curves: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.x_hat)

    @property
    def rho_monotone(self) -> bool:
        """``rho_{-,n}`` strictly increasing and below ``rho_minus``."""
        r = np.asarray(self.rho_minus_n)
        return bool(np.all(np.diff(r) > 0) and np.all(r < self.rho_minus))

    @property
    def tp_monotone(self) -> bool:
        t = np.asarray(self.t_p_n)
        return bool(np.all(np.diff(t) < 0) and np.all(t > self.t_p))

    def gap_rate(self, floor: float = 1e-11) -> tuple[float, float]:
        """Slope of ``log|rho_minus - rho_{-,n}|`` against ``x_hat`` and its R^2.

        Only members whose gap exceeds ``floor`` (the solver's resolution)
        enter the fit.
        """
        gap = self.rho_minus - np.asarray(self.rho_minus_n)
        xs = np.asarray(self.x_hat)
        keep = gap > floor
        if np.count_nonzero(keep) < 2:
            return float("nan"), float("nan")
        slope, _, r2 = linear_fit(xs[keep], np.log(gap[keep]))
        return slope, r2

    def period_fit(self) -> tuple[float, float, float]:
        """Linear fit of ``t_{p,n} - t_p`` against ``delta_n``: (slope, intercept, R^2)."""
        return linear_fit(self.delta, np.asarray(self.t_p_n) - self.t_p)

    def period_fit_squared(self) -> tuple[float, float, float]:
        """Same fit against ``delta_n**2``; the excess period is quadratic in the tail size."""
        d = np.asarray(self.delta)
        return linear_fit(d * d, np.asarray(self.t_p_n) - self.t_p)

    def rows(self):
        for n, row in enumerate(zip(self.x_hat, self.delta, self.rho_minus_n, self.t_p_n)):
            yield (n, *row)


def default_anchors(problem: BvpProblem, n: int = DEFAULT_N_ANCHORS, spacing: float = 2.0) -> list[float]:
    """``x_hat_k = k * spacing / lambda_plus`` for ``k < n``.

    The left-limit error of member ``k`` falls like ``exp(-2 lambda_plus x_hat_k)``.
    With the default spacing the last members reach the solver's resolution
    and the tail amplitude at the final anchor is about ``1e-7``; ``spacing=1``
    keeps every member resolved, which suits studies of the sequence itself.
    """
    lp = lambda_plus(problem.params, problem.rho_plus)
    return [k * spacing / lp for k in range(n)]


def solve_bvp(
    problem: BvpProblem,
    anchors: Optional[Sequence[float]] = None,
    delta0: float = DEFAULT_DELTA0,
    *,
    h: Optional[float] = None,
    bvp_tol: float = DEFAULT_BVP_TOL,
    plateau_tol: Optional[float] = DEFAULT_PLATEAU_TOL,
    normalize: bool = True,
    keep_curves: bool = False,
) -> tuple[object, SequenceRecord]:
    """Profile for ``problem`` and the record of the approximating sequence.

    With ``keep_curves`` every member curve (unnormalized) is kept in
    ``record.curves``.

    Degenerate problems short-circuit: equal states at ``rho*`` give the
    constant profile, ``(0, 1)`` gives the unit step at ``x = 0``.
    """
    params = problem.params
    rs = problem.rho_star
    record = SequenceRecord(rho_minus=problem.rho_minus, t_p=float("nan"))
    if problem.is_constant:
        record.converged = True
        record.t_p = problem.t_p
        return ProfileCurve.constant(params, rs, -1.0, 1.0), record
    if problem.rho_minus <= 0.0 and problem.rho_plus >= 1.0:
        record.converged = True
        record.t_p = math.inf
        return StepProfile(params, 0.0, 1.0, 0.0), record
    if problem.is_step:
        raise ProblemError("only the (0, 1) pair admits a step profile; other degenerate pairs are unsupported")

    lp = lambda_plus(params, problem.rho_plus)
    record.lambda_plus = lp
    record.t_p = problem.t_p
    anchors = list(default_anchors(problem) if anchors is None else anchors)
    if not anchors or any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise ProblemError("anchors must be a non-empty strictly increasing sequence")
    x0 = anchors[0]
    # delta makes the tail amplitude at x_hat_n equal delta0 * exp(-lp (x_hat_n - x_hat_0))
    delta = delta0 * math.exp(lp * x0)

    curve = None
    for n, xh in enumerate(anchors):
        tail = RightTail.from_delta(problem.rho_plus, delta, lp, xh)
        curve, rep = solve_backward(params, tail, h=h, plateau_tol=plateau_tol)
        record.x_hat.append(float(xh))
        record.delta.append(math.exp(-lp * xh))
        record.rho_minus_n.append(rep.left_limit)
        record.t_p_n.append(rep.t_p)
        record.reports.append(rep)
        if keep_curves:
            record.curves.append(curve)
        if not record.converged and abs(rep.left_limit - problem.rho_minus) < bvp_tol:
            record.converged = True
            record.converged_at = n
    if normalize:
        curve = normalize_shift(curve, rs)
    return curve, record


def normalize_shift(curve, rho_star_value: float):
    """Translate the curve so that ``W(0) = rho_star``."""
    if isinstance(curve, StepProfile):
        return curve.translate(-curve.x_jump)
    lo_val = float(curve(curve.x_min))
    hi_val = curve.rho_plus
    if not (lo_val < rho_star_value < hi_val):
        raise DomainError(f"curve range ({lo_val!r}, {hi_val!r}) does not span rho*={rho_star_value!r}")
    vals = curve.values
    if vals[-1] >= rho_star_value:
        k = int(np.searchsorted(vals, rho_star_value))
        k = min(max(k, 1), vals.size - 1)
        a, b = float(curve.grid[k - 1]), float(curve.grid[k])
    else:
        tail = curve.tail
        a = curve.x_hat
        b = tail.x_hat - math.log((tail.rho_plus - rho_star_value) / tail.amplitude) / tail.rate + 1.0
    x0 = bracketed_root(lambda x: float(curve(x)) - rho_star_value, a, b, xtol=1e-13)
    if x0 == 0.0:
        return curve
    return curve.translate(-x0)


def uniqueness_check(
    problem: BvpProblem,
    seed_a: float,
    seed_b: float,
    anchors: Optional[Sequence[float]] = None,
    **kwargs,
) -> float:
    """Sup distance between normalized profiles grown from two tail amplitudes."""
    wa, _ = solve_bvp(problem, anchors, seed_a, **kwargs)
    wb, _ = solve_bvp(problem, anchors, seed_b, **kwargs)
    return sup_distance_common(wa, wb)


def sup_distance_common(wa, wb) -> float:
    """Sup of ``|W_a - W_b|`` on ``W_a``'s nodes inside both grids."""
    if not hasattr(wa, "grid") or not hasattr(wb, "grid"):
        xs = np.linspace(-10.0, 10.0, 4001)
        return float(np.max(np.abs(wa.sample(xs) - wb.sample(xs))))
    lo = max(wa.x_min, wb.x_min)
    hi = min(wa.x_hat, wb.x_hat)
    xs = wa.grid[(wa.grid >= lo) & (wa.grid <= hi)]
    if xs.size == 0:
        xs = np.linspace(lo, hi, 1001)
    return float(np.max(np.abs(wa.sample(xs) - wb.sample(xs))))


def slope_equation(problem: BvpProblem, sigma: float) -> float:
    """``K(sigma) = 1 - V ell sigma / f* - exp(-V ell sigma / f_bar)``."""
    params = problem.params
    info = rho_star(params)
    c = params.V * params.ell * sigma
    return 1.0 - c / info.f_star - math.exp(-c / problem.f_bar)


def slope_equation_root(problem: BvpProblem) -> float:
    """Positive root of the slope equation: predicted ``W'(0)`` of the profile.

    Defined for ``phi = 1 - rho`` only.
    """
    params = problem.params
    if not params.law.is_linear or params.law.offset != 0.0:
        raise UnsupportedError("the slope equation is derived for phi(rho) = 1 - rho only")
    info = rho_star(params)
    fbar = problem.f_bar
    if fbar >= info.f_star * (1 - 1e-14):
        return 0.0
    if fbar <= 0.0:
        raise ProblemError("slope equation needs a positive common flux")
    hi = info.f_star / (params.V * params.ell)
    k = lambda s: slope_equation(problem, s)  # noqa: E731
    # K is concave with K(0)=0 and K'(0)>0: walk the lower end off zero until K>0
    lo = hi
    while k(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    return bracketed_root(k, lo, hi)


def measured_slope(curve, x: float = 0.0, h: Optional[float] = None) -> float:
    """Central difference ``(W(x+h) - W(x-h)) / 2h``; ``h`` defaults to the grid spacing."""
    h = getattr(curve, "h", 1e-3) if h is None else h
    return (float(curve(x + h)) - float(curve(x - h))) / (2.0 * h)


def write_sequence_csv(path, record: SequenceRecord) -> None:
    from .io import write_csv

    write_csv(path, ["n", "x_hat", "delta", "rho_minus_n", "tp_n"], record.rows())
