import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lambertw

from ftlwave.errors import DegenerateRateError
from ftlwave.model import ModelParams, conjugate_density
from ftlwave.rates import (
    characteristic_G,
    characteristic_H,
    lambda_minus,
    lambda_plus,
    rate_constants,
    rate_report,
    verify_bounds,
)


def plus_oracle(ell, rho):
    """Nonzero root of the linearized right tail, linear law, by Lambert W.

    Substituting rho - e exp(-lam x) into the profile equation and keeping
    first order gives lam = c (1 - exp(-a lam)) with a = ell/rho and
    c = rho^2 / (ell (1 - rho)); u = a lam solves u = b (1 - exp(-u)).
    """
    a = ell / rho
    b = a * rho * rho / (ell * (1 - rho))
    u = b + lambertw(-b * math.exp(-b), 0).real
    return u / a


def minus_oracle(ell, rho):
    """Root of b (exp(u) - 1) = u on the nontrivial (-1) branch."""
    a = ell / rho
    b = a * rho * rho / (ell * (1 - rho))
    u = -lambertw(-b * math.exp(-b), -1).real - b
    return u / a


def test_single_solve_constants():
    c = rate_constants(ModelParams(0.5), 0.3, 0.7)
    assert c.a == pytest.approx(5 / 7, abs=1e-14)
    assert c.b == pytest.approx(7 / 3, abs=1e-14)
    assert c.a_hat == pytest.approx(5 / 3, abs=1e-14)
    assert c.b_hat == pytest.approx(3 / 7, abs=1e-14)


def test_lambda_plus_reference_pair_against_lambert_oracle():
    lp = lambda_plus(ModelParams(0.5), 0.7)
    assert lp == pytest.approx(plus_oracle(0.5, 0.7), abs=1e-10)
    assert lp == pytest.approx(2.8357, abs=1e-4)
    assert lp > 2.3724


def test_lambda_minus_reference_pair_against_lambert_oracle_and_bracket():
    lm = lambda_minus(ModelParams(0.5), 0.3)
    assert lm == pytest.approx(minus_oracle(0.5, 0.3), abs=1e-10)
    assert lm == pytest.approx(0.9051, abs=1e-4)
    assert 0.5084 < lm < 1.0168


def test_root_residuals_and_G_H_basics():
    c = rate_constants(ModelParams(0.5), 0.3, 0.7)
    assert characteristic_G(c.a, c.b, 0.0) == 0.0
    assert abs(characteristic_G(c.a, c.b, lambda_plus(ModelParams(0.5), 0.7))) < 1e-10
    assert abs(characteristic_H(c.a_hat, c.b_hat, lambda_minus(ModelParams(0.5), 0.3))) < 1e-10
    assert abs(characteristic_G(0.714286, 7 / 3, 2.8357)) < 1e-4
    for lam in (0.1, 1.0, 5.0):
        assert characteristic_G(0.7, 1.0, lam) > 0


def test_G_and_H_convex():
    c = rate_constants(ModelParams(0.5), 0.3, 0.7)
    lam = np.linspace(0, 4, 401)
    g = np.array([characteristic_G(c.a, c.b, x) for x in lam])
    h = np.array([characteristic_H(c.a_hat, c.b_hat, x) for x in lam])
    assert np.all(g[2:] - 2 * g[1:-1] + g[:-2] > 0)
    assert np.all(h[2:] - 2 * h[1:-1] + h[:-2] > 0)


def test_scale_law():
    base_p = lambda_plus(ModelParams(1.0), 0.7)
    base_m = lambda_minus(ModelParams(1.0), 0.3)
    for ell in (0.5, 0.1, 0.03):
        assert lambda_plus(ModelParams(ell), 0.7) * ell == pytest.approx(base_p, rel=1e-9)
        assert lambda_minus(ModelParams(ell), 0.3) * ell == pytest.approx(base_m, rel=1e-9)
    assert lambda_plus(ModelParams(0.1), 0.7) == pytest.approx(5 * lambda_plus(ModelParams(0.5), 0.7), rel=1e-9)


def test_rates_vanish_near_critical_density():
    p = ModelParams(0.5)
    assert lambda_plus(p, 0.5 + 1e-6) < 1e-4
    assert lambda_minus(p, 0.5 - 1e-6) < 1e-4
    with pytest.raises(DegenerateRateError):
        lambda_plus(p, 0.5)
    with pytest.raises(DegenerateRateError):
        lambda_minus(p, 0.6)


def test_bound_margin_vanishes_at_b_one():
    # rho_plus with b = rho / (1 - rho) = 1 + 1e-9
    b = 1 + 1e-9
    rp = b / (1 + b)
    p = ModelParams(0.5)
    rep = rate_report(p, 1 - rp, rp)
    chk = verify_bounds(rep)
    assert rep.lambda_plus < 1e-6
    assert abs(chk.plus_margin) < 1e-6
    assert chk.plus_ok


def test_single_solve_bounds_pass():
    p = ModelParams(0.5)
    chk = verify_bounds(rate_report(p, 0.3, 0.7), p, c0=2.0, c_hat0=1.0)
    assert chk.ok
    assert chk.plus_margin > 0 and chk.minus_lower_margin > 0 and chk.minus_upper_margin > 0
    assert "plus_c0" in chk.extra


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 0.49), st.floats(0.05, 2.0))
def test_bounds_hold_for_random_pairs(rm, ell):
    p = ModelParams(ell)
    rp = conjugate_density(p, rm)
    rep = rate_report(p, rm, rp)
    assert verify_bounds(rep).ok
    assert rep.lambda_minus < rep.lambda_plus
