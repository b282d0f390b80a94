"""Observed convergence order of the platoon integrator and the profile solver under step halving."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ModelParams
from .profile import RightTail, solve_backward
from .simulator import LeaderRule, Platoon, simulate


@dataclass(frozen=True)
class OrderStudy:
    steps: tuple[float, ...]
    errors: tuple[float, ...]

    @property
    def ratios(self) -> list[float]:
        e = self.errors
        return [e[k] / e[k + 1] for k in range(len(e) - 1)]

    @property
    def orders(self) -> list[float]:
        return [math.log2(r) for r in self.ratios]


def integrator_order(platoon: Platoon, t_end: float, dts: Sequence[float], ref_factor: int = 16) -> OrderStudy:
    """Final-position error of :func:`simulate` against a run with ``dt / ref_factor``.

    ``dts`` should be successive halvings; the reference uses the smallest.
    ``t_end`` is rounded down to a whole number of the largest step so every
    run stops at the same time.
    """
    dts = tuple(float(d) for d in dts)
    coarse = max(dts)
    t_end = max(math.floor(t_end / coarse + 1e-9), 1) * coarse
    ref_dt = min(dts) / ref_factor
    ref = simulate(platoon, ref_dt, t_end, stride=10**9).positions[-1]
    errs = []
    for dt in dts:
        z = simulate(platoon, dt, t_end, stride=10**9).positions[-1]
        errs.append(float(np.max(np.abs(z - ref))))
    return OrderStudy(dts, tuple(errs))


def seeded_platoon(params: ModelParams, n: int = 40, seed: int = 1, rho_range: tuple[float, float] = (0.3, 0.95)) -> Platoon:
    """Platoon with independent uniform densities and a constant-density leader.

    Rough initial data but a smooth vector field: a good order probe, since
    the truncation error over a short run stays well above roundoff.
    """
    rng = np.random.default_rng(seed)
    rho = rng.uniform(rho_range[0], rho_range[1], n - 1)
    z = np.concatenate([[0.0], np.cumsum(params.ell / rho)])
    return Platoon(z, params, LeaderRule.constant(0.5 * (rho_range[0] + rho_range[1])))


def dde_order(
    params: ModelParams,
    tail: RightTail,
    divisors: Sequence[int] = (64, 128, 256, 512),
    span: float = 10.0,
) -> OrderStudy:
    """Differences between profile solves with steps ``ell / divisor`` at the coarsest grid's nodes.

    Each solve runs over ``[x_hat - span, x_hat]`` without the plateau stop.
    ``errors[k]`` is the sup difference between solves ``k`` and ``k + 1``, so
    the study has one entry fewer than ``divisors``.
    """
    hs = [params.ell / d for d in divisors]
    x_min = tail.x_hat - span
    curves = [solve_backward(params, tail, h=h, x_min=x_min, plateau_tol=None)[0] for h in hs]
    nodes = curves[0].grid
    nodes = nodes[nodes >= max(c.x_min for c in curves)]
    diffs = [float(np.max(np.abs(curves[k].sample(nodes) - curves[k + 1].sample(nodes)))) for k in range(len(curves) - 1)]
    return OrderStudy(tuple(hs[:-1]), tuple(diffs))


def exponential_tail(params: ModelParams, rho_plus: float = 0.7, delta: float = 0.2, x_hat: float = 1.0, rate: Optional[float] = None) -> RightTail:
    """Tail ``rho_plus - delta exp(-lambda_plus x)`` anchored at ``x_hat``."""
    from .rates import lambda_plus

    lp = lambda_plus(params, rho_plus) if rate is None else rate
    return RightTail.from_delta(rho_plus, delta, lp, x_hat)
