"""Follow-the-leader particle dynamics.

Cars are indexed rear to front; car ``i`` moves at ``V phi(rho_i)`` with
``rho_i = ell / (z[i+1] - z[i])``. The front car has no leader and follows a
``LeaderRule`` instead, which truncates the bi-infinite platoon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._numerics import adaptive_quad
from .errors import DomainError, HorizonError, NumericalError, StepSizeError
from .model import ModelParams

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAXITER = 200
ORDER_SLACK = 1e-12


@dataclass(frozen=True)
class LeaderRule:
    """How the front car moves.

    ``constant``: density ``rho_lead`` (speed ``V phi(rho_lead)``);
    ``trace``: density ``curve(z - frame_speed * t)``; ``frozen``: speed zero.
    """

    kind: str
    rho_lead: float = 1.0
    curve: Optional[Callable] = field(default=None, compare=False, repr=False)
    frame_speed: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "trace", "frozen"):
            raise DomainError(f"unknown leader rule {self.kind!r}")
        if self.kind == "constant" and not (0.0 < self.rho_lead <= 1.0):
            raise DomainError(f"leader density must lie in (0, 1], got {self.rho_lead!r}")
        if self.kind == "trace" and self.curve is None:
            raise DomainError("trace rule needs a curve")

    @classmethod
    def constant(cls, rho: float) -> "LeaderRule":
        return cls("constant", rho_lead=rho)

    @classmethod
    def trace(cls, curve, frame_speed: float = 0.0) -> "LeaderRule":
        return cls("trace", curve=curve, frame_speed=frame_speed)

    @classmethod
    def frozen(cls) -> "LeaderRule":
        return cls("frozen")

    def density(self, z: float, t: float = 0.0) -> float:
        if self.kind == "constant":
            return self.rho_lead
        if self.kind == "frozen":
            return 1.0
        return float(self.curve(z - self.frame_speed * t))

    def speed(self, params: ModelParams, z: float, t: float) -> float:
        if self.kind == "frozen":
            return 0.0
        return float(params.speed(self.density(z, t)))


@dataclass(frozen=True, eq=False)
class Platoon:
    positions: np.ndarray
    params: ModelParams
    leader: LeaderRule

    def __post_init__(self):
        z = np.asarray(self.positions, dtype=float)
        if z.ndim != 1 or z.size < 1:
            raise DomainError("platoon needs at least one car")
        gaps = np.diff(z)
        if np.any(gaps < self.params.ell * (1.0 - ORDER_SLACK)):
            raise DomainError("cars overlap: every gap must be at least ell")
        object.__setattr__(self, "positions", z)

    @property
    def n(self) -> int:
        return self.positions.size

    def densities(self) -> np.ndarray:
        return self.params.ell / np.diff(self.positions)

    def with_positions(self, z) -> "Platoon":
        return Platoon(np.asarray(z, dtype=float), self.params, self.leader)


def local_density(platoon: Platoon, i: int) -> float:
    z = platoon.positions
    if not (0 <= i < z.size - 1):
        raise IndexError(f"car {i} has no leader spacing (platoon of {z.size})")
    return platoon.params.ell / (z[i + 1] - z[i])


@dataclass(frozen=True)
class DensityField:
    """Piecewise-constant density on ``[edges[k], edges[k+1])`` equal to ``values[k]``."""

    edges: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.edges, x, side="right") - 1
        inside = (k >= 0) & (k < self.values.size)
        out = np.where(inside, self.values[np.clip(k, 0, self.values.size - 1)], np.nan)
        return float(out) if out.ndim == 0 else out

    def intervals(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(v)) for a, b, v in zip(self.edges[:-1], self.edges[1:], self.values)]


def density_field(platoon: Platoon) -> DensityField:
    if platoon.n < 2:
        raise DomainError("density field needs at least two cars")
    return DensityField(platoon.positions.copy(), platoon.densities())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Saved states: ``positions[m, i]`` is car ``i`` at ``times[m]``."""

    times: np.ndarray
    positions: np.ndarray
    params: ModelParams
    leader: LeaderRule

    @property
    def densities(self) -> np.ndarray:
        return self.params.ell / np.diff(self.positions, axis=1)

    def platoon(self, m: int) -> Platoon:
        return Platoon(self.positions[m], self.params, self.leader)

    def leader_densities(self) -> np.ndarray:
        return np.array([self.leader.density(z, t) for z, t in zip(self.positions[:, -1], self.times)])


def _velocities(z: np.ndarray, t: float, params: ModelParams, leader: LeaderRule) -> np.ndarray:
    v = np.empty_like(z)
    if z.size > 1:
        rho = params.ell / (z[1:] - z[:-1])
        v[:-1] = params.V * params.law.phi(rho)
    v[-1] = leader.speed(params, float(z[-1]), t)
    return v


def simulate(
    platoon: Platoon,
    dt: float,
    t_end: float,
    *,
    stride: int = 1,
    safety: float = 0.1,
) -> Trajectory:
    """Fixed-step RK4 integration of the platoon up to ``t_end``.

    ``dt`` must not exceed ``safety * ell / V``. The ordering ``gap >= ell``
    is checked after every step.
    """
    params = platoon.params
    ell, V = params.ell, params.V
    if not dt > 0:
        raise DomainError("time step must be positive")
    if dt > safety * ell / V * (1 + 1e-12):
        raise StepSizeError(f"dt={dt!r} exceeds {safety!r}*ell/V={safety * ell / V!r}")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        n_steps = int(math.ceil(t_end / dt))
    stride = max(int(stride), 1)
    leader = platoon.leader

    z = platoon.positions.copy()
    times = [0.0]
    states = [z.copy()]
    f = lambda zz, tt: _velocities(zz, tt, params, leader)  # noqa: E731
    for k in range(n_steps):
        t = k * dt
        k1 = f(z, t)
        k2 = f(z + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = f(z + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = f(z + dt * k3, t + dt)
        z = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise NumericalError(f"non-finite position after step {k + 1}")
        if z.size > 1 and np.any(np.diff(z) < ell * (1.0 - ORDER_SLACK)):
            raise StepSizeError(f"car ordering violated at t={(k + 1) * dt:.6g}; reduce dt")
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * dt)
            states.append(z.copy())
    return Trajectory(np.array(times), np.array(states), params, leader)


def generate_distribution(
    curve,
    z0: float,
    n_back: int,
    n_fwd: int,
    params: Optional[ModelParams] = None,
    *,
    leader: Optional[LeaderRule] = None,
    damping: float = 1.0,
) -> Platoon:
    """Car positions with ``z[i+1] - z[i] = ell / W(z[i])`` anchored at ``z0``.

    Returns ``n_back + 1 + n_fwd`` cars; the anchor has index ``n_back``.
    Cars behind the anchor solve ``z + ell / W(z) = z_next`` by fixed-point
    iteration with bisection as fallback.
    """
    params = params or curve.params
    ell = params.ell
    pos = [float(z0)]
    for _ in range(n_fwd):
        w = float(curve(pos[-1]))
        if not (0.0 < w <= 1.0):
            raise DomainError(f"profile value {w!r} outside (0, 1]")
        pos.append(pos[-1] + ell / w)
    back = []
    z_next = float(z0)
    for _ in range(n_back):
        z_next = _solve_behind(curve, z_next, ell, damping)
        back.append(z_next)
    z = np.array(back[::-1] + pos)
    return Platoon(z, params, leader or LeaderRule.trace(curve))


def _solve_behind(curve, z_next: float, ell: float, damping: float) -> float:
    g = lambda zz: zz + ell / float(curve(zz)) - z_next  # noqa: E731
    z = z_next - ell / float(curve(z_next))
    for _ in range(FIXED_POINT_MAXITER):
        w = float(curve(z))
        if not (0.0 < w <= 1.0):
            break
        z_new = (1.0 - damping) * z + damping * (z_next - ell / w)
        if abs(z_new - z) <= FIXED_POINT_TOL * max(1.0, abs(z)):
            return z_new
        z = z_new
    # g is increasing in z on a profile; bracket below z_next - ell
    lo = z_next - ell
    step = ell
    for _ in range(200):
        lo -= step
        step *= 2.0
        if g(lo) < 0.0:
            break
    else:
        raise NumericalError("could not bracket the car behind")
    hi = z_next - ell
    if g(hi) < 0.0:
        raise NumericalError("car behind is not bracketed")
    for _ in range(FIXED_POINT_MAXITER):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= FIXED_POINT_TOL * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
    raise NumericalError("fixed point for the car behind did not converge")


@dataclass(frozen=True)
class PeriodReport:
    event_times: np.ndarray
    quadrature_times: np.ndarray
    expected: Optional[float] = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.event_times))

    @property
    def std(self) -> float:
        return float(np.std(self.event_times))

    @property
    def relative_spread(self) -> float:
        return self.std / self.mean


def measure_period(traj: Trajectory, curve, *, quad_tol: float = 1e-10) -> PeriodReport:
    """Per-car takeover times, by event detection and by quadrature.

    Event: first time ``z_i(t)`` reaches ``z_{i+1}(0)`` (linear interpolation
    between saved samples). Quadrature: ``int dz / (V phi(W))`` from
    ``z_i(0)`` to ``z_{i+1}(0)``.
    """
    params = traj.params
    z = traj.positions
    t = traj.times
    target = z[0, 1:]
    cars = z[:, :-1]
    reached = cars >= target[None, :]
    if not np.all(reached[-1]):
        raise HorizonError("horizon too short: some cars never reached their leader's start")
    m = np.argmax(reached, axis=0)
    idx = np.arange(target.size)
    m_prev = np.maximum(m - 1, 0)
    z1 = cars[m, idx]
    z0 = cars[m_prev, idx]
    t1 = t[m]
    t0 = t[m_prev]
    frac = np.where(z1 > z0, (target - z0) / np.where(z1 > z0, z1 - z0, 1.0), 0.0)
    events = t0 + frac * (t1 - t0)

    V, law = params.V, params.law
    quad = np.array(
        [
            adaptive_quad(lambda s: 1.0 / (V * float(law.phi(curve(s)))), a, b, tol=quad_tol)
            for a, b in zip(z[0, :-1], target)
        ]
    )
    return PeriodReport(events, quad)


def trace_error(traj: Trajectory, curve, *, frame_speed: float = 0.0) -> float:
    """Largest ``|W(z_i(t) - c t) - rho_i(t)|`` over saved times and cars with a leader."""
    return float(np.max(trace_error_series(traj, curve, frame_speed=frame_speed)))


def trace_error_series(traj: Trajectory, curve, *, frame_speed: float = 0.0) -> np.ndarray:
    rho = traj.densities
    zs = traj.positions[:, :-1] - frame_speed * traj.times[:, None]
    w = np.asarray(curve(zs.ravel()), dtype=float).reshape(zs.shape)
    return np.max(np.abs(w - rho), axis=1)


def write_cars_csv(path, traj: Trajectory) -> None:
    """Rows ``t,i,z,rho``; the front car's density is the one its leader rule imposes."""
    from .io import write_csv

    rho = traj.densities
    lead = traj.leader_densities()

    def rows():
        for m, tm in enumerate(traj.times):
            zrow = traj.positions[m]
            for i in range(zrow.size):
                r = rho[m, i] if i < zrow.size - 1 else lead[m]
                yield (float(tm), i, float(zrow[i]), float(r))

    write_csv(path, ["t", "i", "z", "rho"], rows())
