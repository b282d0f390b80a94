"""Traveling waves as stationary profiles of a shifted velocity law.

In coordinates ``xi = x - V sigma t`` a car moving at ``V phi(rho)`` moves at
``V (phi(rho) - sigma)``, so a wave of speed ``V sigma`` is a stationary
profile for the law ``phi - sigma``. Everything stationary is reused as is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bvp import BvpProblem
from .errors import FrameError, ProblemError
from .model import ModelParams
from .simulator import LeaderRule, simulate, trace_error_series

FRAME_TOL = 1e-10


@dataclass(frozen=True)
class FrameSpec:
    """Lab parameters and the wave-speed fraction ``sigma`` (wave speed ``V sigma``)."""

    params: ModelParams
    sigma: float

    @property
    def speed(self) -> float:
        return self.params.V * self.sigma

    @property
    def frame_params(self) -> ModelParams:
        return self.params.with_law(self.params.law.shifted(self.sigma))

    def phi(self, rho):
        return self.params.law.phi(rho) - self.sigma

    def flux(self, rho):
        return self.params.V * rho * self.phi(rho)


def shift_problem(params: ModelParams, sigma: float, rho_minus: float, rho_plus: float) -> BvpProblem:
    """Boundary-value problem for the wave of speed ``V sigma`` in its own frame."""
    frame = FrameSpec(params, sigma)
    lo, hi = min(rho_minus, rho_plus), max(rho_minus, rho_plus)
    probe = np.linspace(lo, hi, 1001)
    worst = float(np.min(frame.phi(probe)))
    if worst <= 0.0:
        raise FrameError(f"phi - sigma reaches {worst!r} on [{lo!r}, {hi!r}]; cars would stop in the moving frame")
    gap = abs(float(frame.flux(rho_minus)) - float(frame.flux(rho_plus)))
    if gap >= FRAME_TOL:
        raise FrameError(f"shifted fluxes differ by {gap!r}: ({rho_minus!r}, {rho_plus!r}) is not a pair for sigma={sigma!r}")
    try:
        return BvpProblem(frame.frame_params, rho_minus, rho_plus)
    except ProblemError as exc:
        raise FrameError(str(exc)) from exc


@dataclass(frozen=True)
class TravelReport:
    times: np.ndarray
    errors: np.ndarray
    sigma: float
    probe_sigma: float

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors))

    def growth_fit(self) -> tuple[float, float, float]:
        """Linear fit of the error series against time: (slope, intercept, R^2)."""
        from ._numerics import linear_fit

        return linear_fit(self.times, self.errors)


def verify_traveling(
    curve,
    params: ModelParams,
    sigma: float,
    t_end: Optional[float] = None,
    *,
    n_periods: float = 3.0,
    dt: Optional[float] = None,
    probe_sigma: Optional[float] = None,
    saves_per_period: int = 20,
) -> TravelReport:
    """Run the lab-frame platoon generated by ``curve`` and measure how well it traces the moving wave.

    ``curve`` is the profile in the moving frame. The error at each saved time
    is ``max_i |W(z_i(t) - V s t) - rho_i(t)|`` with ``s = probe_sigma``
    (default ``sigma``); a wrong ``probe_sigma`` is a control run.
    """
    from .diagnostics import covering_platoon

    frame = FrameSpec(params, sigma)
    fbar = float(frame.flux(curve.rho_plus))
    t_p = params.ell / fbar
    t_end = n_periods * t_p if t_end is None else float(t_end)
    leader = LeaderRule.trace(curve, frame_speed=frame.speed)
    platoon = covering_platoon(curve, extra_back=int(math.ceil(t_end / t_p)) + 5, params=params, leader=leader)

    save_dt = t_p / saves_per_period
    dt_max = 0.1 * params.ell / params.V
    if dt is None:
        per_save = int(math.ceil(save_dt / dt_max))
        dt = save_dt / per_save
    else:
        per_save = max(int(round(save_dt / dt)), 1)
    traj = simulate(platoon, dt, int(round(t_end / dt)) * dt, stride=per_save)
    s = sigma if probe_sigma is None else probe_sigma
    errs = trace_error_series(traj, curve, frame_speed=params.V * s)
    return TravelReport(traj.times.copy(), errs, sigma, s)
