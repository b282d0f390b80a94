"""Exponential approach rates of a profile toward its end states.

Near ``rho_plus`` the linearized profile equation has solutions
``exp(-lam x)`` with ``G(lam) = b (exp(-a lam) - 1) + a lam = 0``; near
``rho_minus`` solutions ``exp(lam x)`` with
``H(lam) = b_hat (exp(a_hat lam) - 1) - a_hat lam = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from ._numerics import bracketed_root
from .errors import DegenerateRateError, DomainError
from .model import ModelParams, rho_star

RATE_RTOL = 1e-12


@dataclass(frozen=True)
class RateConstants:
    a: float
    b: float
    a_hat: float
    b_hat: float


def _ab(params: ModelParams, rho: float) -> tuple[float, float]:
    law = params.law
    p = float(law.phi(rho))
    if p <= 0.0:
        raise DegenerateRateError(f"phi({rho!r}) = {p!r}; rate undefined at a stopped state")
    return params.ell / rho, -float(law.dphi(rho)) * rho / p


def rate_constants(params: ModelParams, rho_minus: float, rho_plus: float) -> RateConstants:
    if not (0.0 < rho_minus and 0.0 < rho_plus):
        raise DomainError("rate constants need positive densities")
    a, b = _ab(params, rho_plus)
    a_hat, b_hat = _ab(params, rho_minus)
    return RateConstants(a, b, a_hat, b_hat)


def characteristic_G(a: float, b: float, lam: float) -> float:
    return b * math.expm1(-a * lam) + a * lam


def characteristic_H(a_hat: float, b_hat: float, lam: float) -> float:
    return b_hat * math.expm1(a_hat * lam) - a_hat * lam


def lambda_plus(params: ModelParams, rho_plus: float) -> float:
    """Decay rate toward ``rho_plus`` as ``x -> +inf``.

    The positive root of ``G`` lies in ``[(2/a) ln b, b/a]``: ``G`` is negative
    at twice its minimiser and ``G(b/a) = b exp(-b) > 0``.
    """
    info = rho_star(params)
    if not (rho_plus > info.rho_star):
        raise DegenerateRateError(
            f"rho_plus={rho_plus!r} <= rho*={info.rho_star!r}: no decaying mode, only the trivial profile"
        )
    a, b = _ab(params, rho_plus)
    if b <= 1.0:
        return 0.0
    lo, hi = 2.0 / a * math.log(b), b / a
    if lo <= 0.0:
        return 0.0
    if characteristic_G(a, b, hi) <= 0.0:
        # G(b/a) = b exp(-b) is below rounding: the root is within that of b/a.
        # u = b (1 - exp(-u)) contracts there (slope b exp(-u) < 1), so iterate.
        u = b
        for _ in range(100):
            u_next = b * -math.expm1(-u)
            if u_next == u:
                break
            u = u_next
        return u / a
    return bracketed_root(
        lambda lam: characteristic_G(a, b, lam),
        lo,
        hi,
        lambda lam: a - a * b * math.exp(-a * lam),
        xtol=0.0,
        rtol=RATE_RTOL,
    )


def lambda_minus(params: ModelParams, rho_minus: float) -> float:
    """Growth rate away from ``rho_minus`` (decay as ``x -> -inf``).

    Bracket ``[-ln(b_hat)/a_hat, -2 ln(b_hat)/a_hat]``.
    """
    info = rho_star(params)
    if rho_minus <= 0.0:
        raise DegenerateRateError("rho_minus = 0: the left state is reached at finite x", step_profile=True)
    if not (rho_minus < info.rho_star):
        raise DegenerateRateError(
            f"rho_minus={rho_minus!r} >= rho*={info.rho_star!r}: no decaying mode, only the trivial profile"
        )
    a_hat, b_hat = _ab(params, rho_minus)
    if b_hat >= 1.0:
        return 0.0
    c = -math.log(b_hat)
    if c <= 0.0:
        return 0.0
    return bracketed_root(
        lambda lam: characteristic_H(a_hat, b_hat, lam),
        c / a_hat,
        2.0 * c / a_hat,
        lambda lam: a_hat * b_hat * math.exp(a_hat * lam) - a_hat,
        xtol=0.0,
        rtol=RATE_RTOL,
    )


@dataclass(frozen=True)
class RateReport:
    constants: RateConstants
    lambda_plus: float
    lambda_minus: float
    bracket_plus: tuple[float, float]
    bracket_minus: tuple[float, float]
    rho_minus: float
    rho_plus: float
    ell: float

    @property
    def plus_bound(self) -> float:
        """Lower bound ``(2/a) ln b`` for ``lambda_plus``."""
        return self.bracket_plus[0]

    @property
    def minus_bounds(self) -> tuple[float, float]:
        return self.bracket_minus

    def as_row(self) -> list:
        c = self.constants
        return [c.a, c.b, c.a_hat, c.b_hat, self.lambda_plus, self.lambda_minus, verify_bounds(self).ok]


def rate_report(params: ModelParams, rho_minus: float, rho_plus: float) -> RateReport:
    c = rate_constants(params, rho_minus, rho_plus)
    lp = lambda_plus(params, rho_plus)
    lm = lambda_minus(params, rho_minus)
    bp = (2.0 / c.a * math.log(c.b), c.b / c.a)
    bm = (-math.log(c.b_hat) / c.a_hat, -2.0 * math.log(c.b_hat) / c.a_hat)
    return RateReport(c, lp, lm, bp, bm, rho_minus, rho_plus, params.ell)


@dataclass(frozen=True)
class BoundCheck:
    plus_margin: float
    minus_lower_margin: float
    minus_upper_margin: float
    plus_ok: bool
    minus_ok: bool
    extra: dict

    @property
    def ok(self) -> bool:
        return self.plus_ok and self.minus_ok


def verify_bounds(
    report: RateReport,
    params: Optional[ModelParams] = None,
    *,
    c0: Optional[float] = None,
    c_hat0: Optional[float] = None,
) -> BoundCheck:
    """Margins of the rate bounds (positive means the strict inequality holds).

    When ``params`` and the constants ``c0``/``c_hat0`` are supplied, the
    alternative bound forms written in terms of those constants are added to
    ``extra`` as informational margins; they do not affect ``ok``.
    """
    c = report.constants
    lp, lm = report.lambda_plus, report.lambda_minus
    lower_p = 2.0 / c.a * math.log(c.b)
    lo_m = -math.log(c.b_hat) / c.a_hat
    hi_m = -2.0 * math.log(c.b_hat) / c.a_hat
    pm = lp - lower_p
    ml = lm - lo_m
    mu = hi_m - lm
    # b -> 1 collapses root and bound together (they differ at second order in
    # b - 1): accept equality up to the root tolerance in that limit
    tie_p = 4.0 * RATE_RTOL * lp
    tie_m = 4.0 * RATE_RTOL * lm
    plus_ok = pm > 0.0 or (lp == 0.0 and abs(lower_p) < 1e-6) or (lp < 1e-6 and abs(pm) <= tie_p)
    minus_ok = (ml > -tie_m if lm < 1e-6 else ml > 0.0) and (mu > -tie_m if lm < 1e-6 else mu > 0.0)
    minus_ok = minus_ok or (lm == 0.0 and abs(hi_m) < 1e-6)

    extra: dict = {}
    if params is not None:
        info = rho_star(params)
        rp, rm, ell = report.rho_plus, report.rho_minus, params.ell
        if c0 is not None:
            arg = 1.0 + c0 * info.rho_star / float(params.flux(rp)) * (rp - info.rho_star)
            extra["plus_c0"] = lp - 2.0 * rp / ell * math.log(arg)
            arg_m = 1.0 - c0 * info.rho_star / info.f_star * (info.rho_star - rm)
            if arg_m > 0.0:
                lo2 = -rm / ell * math.log(arg_m)
                extra["minus_c0_lower"] = lm - lo2
                extra["minus_c0_upper"] = 2.0 * lo2 - lm
        if c_hat0 is not None and c_hat0 * rm > 0.0:
            lo3 = -rm / ell * math.log(c_hat0 * rm)
            extra["minus_chat0_lower"] = lm - lo3
            extra["minus_chat0_upper"] = 2.0 * lo3 - lm
    return BoundCheck(pm, ml, mu, plus_ok, minus_ok, extra)
