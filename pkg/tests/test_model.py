import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftlwave.errors import AssumptionError, DomainError
from ftlwave.model import (
    ModelParams,
    VelocityLaw,
    check_assumptions,
    conjugate_density,
    conjugate_left,
    estimate_c0,
    flux,
    phi,
    rho_star,
)

LIN = VelocityLaw.linear()


def quadratic_law():
    return VelocityLaw.custom(lambda r: (1 - r) ** 2, lambda r: -2 * (1 - r), name="quadratic")


def test_phi_linear_values():
    assert phi(LIN, 0.0) == 1.0
    assert phi(LIN, 1.0) == 0.0
    assert phi(LIN, 0.3) == pytest.approx(0.7, abs=1e-15)


def test_phi_rejects_out_of_range():
    with pytest.raises(DomainError):
        phi(LIN, 1.2)


def test_flux_values():
    p = ModelParams(0.5, 1.0)
    assert flux(p, 0.5) == pytest.approx(0.25)
    assert flux(p, 0.3) == pytest.approx(0.21)
    assert flux(p, 0.0) == 0.0
    assert flux(ModelParams(0.5, 1.0, quadratic_law()), 0.0) == 0.0


def test_rho_star_linear_and_scaled_speed():
    a = rho_star(ModelParams(0.5, 1.0))
    b = rho_star(ModelParams(0.5, 2.0))
    assert a.rho_star == pytest.approx(0.5, abs=1e-12)
    assert a.f_star == pytest.approx(0.25, abs=1e-12)
    assert b.rho_star == pytest.approx(0.5, abs=1e-12)
    assert b.f_star == pytest.approx(0.5, abs=1e-12)


def test_rho_star_quadratic_law_against_bisection():
    # f'(rho) = V (1 - rho)(1 - 3 rho): independent bisection on that factorization
    lo, hi = 0.01, 0.9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (1 - mid) * (1 - 3 * mid) > 0:
            lo = mid
        else:
            hi = mid
    info = rho_star(ModelParams(0.5, 1.0, quadratic_law()))
    assert info.rho_star == pytest.approx(0.5 * (lo + hi), abs=1e-10)
    assert info.rho_star == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
def test_rho_star_invariant_under_speed_scaling(k):
    law = VelocityLaw.custom(lambda r: (1 - r) / (1 + r), lambda r: -2 / (1 + r) ** 2)
    base = rho_star(ModelParams(0.5, 1.0, law)).rho_star
    assert rho_star(ModelParams(0.5, k, law)).rho_star == pytest.approx(base, abs=1e-12)


def test_flux_info_invariants():
    info = rho_star(ModelParams(0.3, 1.7))
    p = ModelParams(0.3, 1.7)
    assert abs(float(p.dflux(info.rho_star))) < 1e-10
    assert abs(float(p.flux(1.0))) < 1e-12


def test_conjugate_density_examples():
    p = ModelParams(0.5, 1.0)
    assert conjugate_density(p, 0.3) == pytest.approx(0.7, abs=1e-12)
    assert conjugate_density(p, 0.5) == pytest.approx(0.5, abs=1e-12)
    assert conjugate_density(p, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_conjugate_left_inverts_conjugate_density():
    p = ModelParams(0.5, 1.0)
    assert conjugate_left(p, 0.7) == pytest.approx(0.3, abs=1e-12)
    assert conjugate_left(p, 1.0) == 0.0
    with pytest.raises(DomainError):
        conjugate_left(p, 0.2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.5))
def test_conjugate_flux_equality_linear(rm):
    p = ModelParams(0.5, 1.0)
    rp = conjugate_density(p, rm)
    assert rp >= 0.5 - 1e-12
    assert abs(float(p.flux(rp)) - float(p.flux(rm))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0))
def test_conjugate_flux_equality_rational_law(u):
    law = VelocityLaw.custom(lambda r: (1 - r) / (1 + r), lambda r: -2 / (1 + r) ** 2)
    p = ModelParams(0.5, 1.0, law)
    assert check_assumptions(law, p).passed
    rm = u * rho_star(p).rho_star
    rp = conjugate_density(p, rm)
    assert abs(float(p.flux(rp)) - float(p.flux(rm))) < 1e-10


def test_check_assumptions_linear():
    p = ModelParams(0.5, 1.0)
    rep = check_assumptions(LIN, p)
    assert rep.passed
    assert estimate_c0(p) == pytest.approx(2.0, rel=1e-6)


def test_check_assumptions_flags_flat_start():
    law = VelocityLaw.custom(lambda r: 1 - r * r, lambda r: -2 * r)
    rep = check_assumptions(law, ModelParams(0.5, 1.0, law))
    assert not rep.passed
    assert any("phi" in c.name for c in rep.failures())


def test_check_assumptions_rational_law_matches_grid_oracle():
    law = VelocityLaw.custom(lambda r: (1 - r) / (1 + r), lambda r: -2 / (1 + r) ** 2)
    p = ModelParams(0.5, 1.0, law)
    rep = check_assumptions(law, p)
    r = np.linspace(0, 1, 1001)
    dphi_ok = bool(np.all(-2 / (1 + r) ** 2 < 0))
    f = r * (1 - r) / (1 + r)
    d2 = f[2:] - 2 * f[1:-1] + f[:-2]
    assert rep.passed == (dphi_ok and bool(np.all(d2 < 0)))


def test_flux_concave_on_grid():
    p = ModelParams(0.5, 1.0)
    c0 = estimate_c0(p)
    r = np.linspace(0, 1, 1001)
    h = r[1] - r[0]
    f = p.flux(r)
    d2 = f[2:] - 2 * f[1:-1] + f[:-2]
    assert np.all(d2 <= -c0 * h * h + 1e-10)


def test_law_endpoint_validation():
    with pytest.raises(AssumptionError):
        VelocityLaw.custom(lambda r: 0.9 - r, lambda r: -1.0 + 0 * r)


def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(0.0)
    with pytest.raises(DomainError):
        ModelParams(0.5, -1.0)
    with pytest.raises(DomainError):
        ModelParams(math.inf)


def test_table_law_reproduces_linear():
    law = VelocityLaw.from_table([0.0, 0.5, 1.0], [1.0, 0.5, 0.0])
    r = np.linspace(0, 1, 11)
    assert np.allclose(law.phi(r), 1 - r, atol=1e-14)
