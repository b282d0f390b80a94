"""Model parameters, velocity laws, flux and the structural assumption checks.

The speed of a car is ``V * phi(rho)`` where ``rho`` is its local density and
the macroscopic flux is ``f(rho) = V * rho * phi(rho)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._numerics import bracketed_root
from .errors import AssumptionError, DomainError, RootFindingError

ScalarFn = Callable[[float], float]

_ENDPOINT_TOL = 1e-12
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class VelocityLaw:
    """Speed fraction ``phi`` as a function of density.

    ``kind`` is ``"linear"`` for ``phi = 1 - rho`` or ``"custom"`` for a caller
    supplied pair ``(func, deriv)``; custom functions must accept numpy arrays.
    ``c_hat0`` and ``c0`` are the declared constants with ``phi' <= -c_hat0``
    and ``f'' <= -c0``; ``None`` means "estimate on a grid".

    ``offset`` subtracts a constant from ``phi``; it is nonzero only for the
    effective law of a moving frame and then the endpoint identities
    ``phi(0) = 1``, ``phi(1) = 0`` no longer hold.
    """

    kind: str = "linear"
    func: Optional[ScalarFn] = field(default=None, compare=False, repr=False)
    deriv: Optional[ScalarFn] = field(default=None, compare=False, repr=False)
    c_hat0: Optional[float] = None
    c0: Optional[float] = None
    offset: float = 0.0
    name: str = "linear"

    def __post_init__(self):
        if self.kind not in ("linear", "custom"):
            raise AssumptionError(f"unknown velocity law kind {self.kind!r}")
        if self.kind == "custom":
            if self.func is None or self.deriv is None:
                raise AssumptionError("custom velocity law needs both phi and phi'")
            if self.offset == 0.0:
                p0, p1 = float(self.func(0.0)), float(self.func(1.0))
                if abs(p0 - 1.0) > _ENDPOINT_TOL or abs(p1) > _ENDPOINT_TOL:
                    raise AssumptionError(
                        f"velocity law must satisfy phi(0)=1, phi(1)=0; got {p0!r}, {p1!r}"
                    )

    @classmethod
    def linear(cls) -> "VelocityLaw":
        return cls(kind="linear", c_hat0=1.0, name="linear")

    @classmethod
    def custom(
        cls,
        func: ScalarFn,
        deriv: ScalarFn,
        *,
        c_hat0: Optional[float] = None,
        c0: Optional[float] = None,
        name: str = "custom",
    ) -> "VelocityLaw":
        return cls(kind="custom", func=func, deriv=deriv, c_hat0=c_hat0, c0=c0, name=name)

    @classmethod
    def from_table(cls, rho, phi_values, *, name: str = "table") -> "VelocityLaw":
        """Custom law from tabulated ``(rho, phi)`` pairs via monotone cubic interpolation."""
        from scipy.interpolate import PchipInterpolator

        rho = np.asarray(rho, dtype=float)
        vals = np.asarray(phi_values, dtype=float)
        if rho.ndim != 1 or rho.size < 2 or rho[0] != 0.0 or rho[-1] != 1.0:
            raise AssumptionError("velocity table must span rho = 0 .. 1")
        interp = PchipInterpolator(rho, vals, extrapolate=True)
        dinterp = interp.derivative()
        return cls.custom(interp, dinterp, name=name)

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def shifted(self, sigma: float) -> "VelocityLaw":
        """Effective law ``phi - sigma`` seen from a frame moving at speed ``V*sigma``."""
        return VelocityLaw(
            kind=self.kind,
            func=self.func,
            deriv=self.deriv,
            c_hat0=self.c_hat0,
            c0=self.c0,
            offset=self.offset + sigma,
            name=self.name if sigma == 0 else f"{self.name}-shift({sigma:g})",
        )

    def phi(self, rho):
        """Unchecked evaluation; accepts scalars or arrays."""
        if self.kind == "linear":
            return 1.0 - rho - self.offset
        return self.func(rho) - self.offset

    def dphi(self, rho):
        if self.kind == "linear":
            return -1.0 + 0.0 * rho
        return self.deriv(rho)


@dataclass(frozen=True)
class ModelParams:
    """Car length ``ell``, speed limit ``V`` and the velocity law."""

    ell: float
    V: float = 1.0
    law: VelocityLaw = field(default_factory=VelocityLaw.linear)

    def __post_init__(self):
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise DomainError(f"car length must be positive, got {self.ell!r}")
        if not (self.V > 0 and math.isfinite(self.V)):
            raise DomainError(f"speed limit must be positive, got {self.V!r}")

    def flux(self, rho):
        return self.V * rho * self.law.phi(rho)

    def dflux(self, rho):
        return self.V * (self.law.phi(rho) + rho * self.law.dphi(rho))

    def speed(self, rho):
        return self.V * self.law.phi(rho)

    def with_law(self, law: VelocityLaw) -> "ModelParams":
        return ModelParams(self.ell, self.V, law)


@dataclass(frozen=True)
class FluxInfo:
    rho_star: float
    f_star: float
    c0_est: float


def _check_density(rho: float) -> float:
    rho = float(rho)
    if not (-_DOMAIN_SLACK <= rho <= 1.0 + _DOMAIN_SLACK):
        raise DomainError(f"density must lie in [0, 1], got {rho!r}")
    return min(max(rho, 0.0), 1.0)


def phi(law: VelocityLaw, rho: float) -> float:
    """Speed fraction at density ``rho``; raises ``DomainError`` outside [0, 1]."""
    return float(law.phi(_check_density(rho)))


def flux(params: ModelParams, rho: float) -> float:
    """Flux ``V rho phi(rho)`` at a density in [0, 1]."""
    return float(params.flux(_check_density(rho)))


def _grid(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, max(int(n), 2))


def estimate_c0(params: ModelParams, n: int = 1001) -> float:
    """Largest ``c0`` with ``f'' <= -c0`` as sampled by second differences."""
    x = _grid(n)
    hx = x[1] - x[0]
    f = params.flux(x)
    d2 = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / hx**2
    return float(-np.max(d2))


def rho_star(params: ModelParams, n: int = 1001) -> FluxInfo:
    """Critical density where the flux peaks.

    Scans ``f'`` on a grid for the first change from positive to non-positive
    and refines the bracket to 1e-12.
    """
    c0 = estimate_c0(params, n)
    if params.law.is_linear:
        rs = 0.5 * (1.0 - params.law.offset)
        return FluxInfo(rs, float(params.flux(rs)), c0)

    x = _grid(n)
    d = params.dflux(x)
    idx = np.nonzero((d[:-1] > 0) & (d[1:] <= 0))[0]
    if idx.size == 0:
        raise AssumptionError("f' has no sign change on [0, 1]; flux has no interior maximum")
    k = int(idx[0])
    if d[k + 1] == 0.0:
        rs = float(x[k + 1])
    else:
        rs = bracketed_root(lambda r: float(params.dflux(r)), x[k], x[k + 1])
    return FluxInfo(rs, float(params.flux(rs)), c0)


def conjugate_density(params: ModelParams, rho_minus: float, info: Optional[FluxInfo] = None) -> float:
    """The density ``rho_plus >= rho_star`` carrying the same flux as ``rho_minus``."""
    info = info or rho_star(params)
    rm = float(rho_minus)
    if rm < -_DOMAIN_SLACK or rm > info.rho_star + _DOMAIN_SLACK:
        raise DomainError(f"rho_minus must lie in [0, rho*={info.rho_star:.15g}], got {rm!r}")
    rm = min(max(rm, 0.0), info.rho_star)
    fbar = float(params.flux(rm))
    if info.rho_star - rm <= _DOMAIN_SLACK:
        return info.rho_star
    g = lambda r: float(params.flux(r)) - fbar  # noqa: E731
    try:
        return bracketed_root(g, info.rho_star, 1.0, lambda r: float(params.dflux(r)))
    except RootFindingError as exc:
        raise DomainError(f"no conjugate density for rho_minus={rm!r}: {exc}") from exc


def conjugate_left(params: ModelParams, rho_plus: float, info: Optional[FluxInfo] = None) -> float:
    """The density ``rho_minus <= rho_star`` carrying the same flux as ``rho_plus``."""
    info = info or rho_star(params)
    rp = float(rho_plus)
    if rp < info.rho_star - _DOMAIN_SLACK or rp > 1.0 + _DOMAIN_SLACK:
        raise DomainError(f"rho_plus must lie in [rho*={info.rho_star:.15g}, 1], got {rp!r}")
    rp = min(max(rp, info.rho_star), 1.0)
    fbar = float(params.flux(rp))
    if rp - info.rho_star <= _DOMAIN_SLACK:
        return info.rho_star
    if fbar <= 0.0:
        return 0.0
    g = lambda r: float(params.flux(r)) - fbar  # noqa: E731
    try:
        return bracketed_root(g, 0.0, info.rho_star, lambda r: float(params.dflux(r)))
    except RootFindingError as exc:
        raise DomainError(f"no conjugate density for rho_plus={rp!r}: {exc}") from exc


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst_margin: float
    where: float


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[Check, ...]
    c_hat0_est: float
    c0_est: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_assumptions(law: VelocityLaw, params: ModelParams, n: int = 1001) -> AssumptionReport:
    """Grid check of the endpoint, slope, concavity and (phi2) conditions.

    Positive margins mean the inequality holds. ``phi2`` is tested in the form
    implied by ``f'' <= -c0``, namely ``phi'' <= -(2 phi' + c0/V)/rho``.
    """
    params = params.with_law(law)
    x = _grid(n)
    hx = x[1] - x[0]
    p = np.asarray(law.phi(x), dtype=float)
    dp = np.asarray(law.dphi(x), dtype=float)
    f = np.asarray(params.flux(x), dtype=float)
    checks = []

    def add(name, margins, where):
        k = int(np.argmin(margins))
        checks.append(Check(name, bool(margins[k] >= 0.0), float(margins[k]), float(where[k])))

    ends = np.array([_ENDPOINT_TOL - abs(p[0] - 1.0), _ENDPOINT_TOL - abs(p[-1])])
    add("phi_endpoints", ends, np.array([0.0, 1.0]))

    c_hat0_est = float(np.min(-dp))
    if law.c_hat0 is not None:
        add("phi_slope", -law.c_hat0 - dp, x)
    else:
        # strict negativity: a zero slope anywhere is a failure
        m = -dp
        k = int(np.argmin(m))
        checks.append(Check("phi_slope", bool(m[k] > 0.0), float(m[k]), float(x[k])))

    fends = np.array([_ENDPOINT_TOL - abs(f[0]), _ENDPOINT_TOL - abs(f[-1])])
    add("flux_endpoints", fends, np.array([0.0, 1.0]))

    d2f = f[2:] - 2.0 * f[1:-1] + f[:-2]
    c0_est = float(-np.max(d2f) / hx**2)
    c0 = law.c0 if law.c0 is not None else c0_est
    add("flux_concavity", -c0 * hx**2 + 1e-10 - d2f, x[1:-1])
    if law.c0 is None:
        checks.append(Check("flux_strict_concavity", c0_est > 0.0, c0_est, float("nan")))

    df = params.dflux(x)
    signs = np.sign(df)
    signs = signs[signs != 0]  # a node exactly at rho* is not a second change
    changes = int(np.count_nonzero(np.diff(signs) != 0))
    checks.append(Check("unique_rho_star", changes == 1 and df[0] > 0 and df[-1] < 0,
                        float(min(df[0], -df[-1])), float("nan")))

    # central differences for both derivatives: then V (2 phi' + rho phi'') is
    # exactly the flux second difference over hx^2, consistent with c0_est
    d2p = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / hx**2
    dpc = (p[2:] - p[:-2]) / (2.0 * hx)
    xi = x[1:-1]
    bound = -(2.0 * dpc + c0 / params.V) / xi
    add("phi2", bound - d2p + 1e-8, xi)

    return AssumptionReport(tuple(checks), c_hat0_est, c0_est)
