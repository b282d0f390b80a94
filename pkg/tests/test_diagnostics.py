import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftlwave.bvp import BvpProblem, StepProfile, measured_slope, solve_bvp
from ftlwave.diagnostics import (
    STABILITY_PLATEAU_TOL,
    Perturbation,
    covering_platoon,
    envelope_shifts,
    inflection_bound,
    is_monotone,
    profile_inverse,
    shape_checks,
    stability_run,
    write_envelopes_csv,
)
from ftlwave.errors import DomainError, PreconditionError
from ftlwave.io import read_csv
from ftlwave.profile import ProfileCurve
from ftlwave.rates import rate_report


@pytest.fixture(scope="module")
def platoon(curve):
    return covering_platoon(curve)


def test_inverse_at_rho_star_is_origin(curve):
    assert profile_inverse(curve, 0.5) == pytest.approx(0.0, abs=1e-11)


@settings(max_examples=80, deadline=None)
@given(st.floats(-12.0, 4.0))
def test_inverse_round_trip(curve, x):
    w = curve(x)
    if not (curve.left_limit + 1e-6 <= w <= curve.rho_plus - 1e-6):
        return
    assert curve(profile_inverse(curve, w)) == pytest.approx(w, abs=1e-12)


def test_inverse_in_analytic_tail(curve):
    x = curve.x_hat + 0.5
    assert profile_inverse(curve, curve(x), margin=1e-12) == pytest.approx(x, abs=1e-8)


def test_inverse_vectorised(curve):
    xs = np.array([-3.0, -1.0, 0.0, 0.5, 1.0])
    np.testing.assert_allclose(profile_inverse(curve, curve.sample(xs)), xs, atol=1e-10)


@pytest.mark.parametrize("rho", [0.2, 0.3, 0.7, 0.9, float("nan")])
def test_inverse_outside_range(curve, rho):
    with pytest.raises(DomainError):
        profile_inverse(curve, rho)


def test_inverse_needs_sampled_curve(params):
    with pytest.raises(DomainError):
        profile_inverse(StepProfile(params), 0.5)


def test_generated_platoon_collapses_envelopes(curve, platoon):
    env = envelope_shifts(platoon, curve)
    assert abs(env.h_plus) <= 1e-8 and abs(env.h_minus) <= 1e-8


@pytest.mark.parametrize("s", [-2.0, 0.37, 1.3])
def test_shifted_generated_platoon_collapses_to_shift(curve, s):
    env = envelope_shifts(covering_platoon(curve.translate(s), z0=s), curve)
    assert env.h_plus == pytest.approx(s, abs=1e-8)
    assert env.h_minus == pytest.approx(s, abs=1e-8)


def test_lower_density_single_car_raises_upper_shift(curve, platoon):
    # open the gap in front of car i only: rho_i drops, every other density is unchanged
    rho = platoon.densities()
    i = int(np.argmin(np.abs(rho - 0.5)))
    z = platoon.positions.copy()
    z[i + 1 :] += 0.01
    moved = platoon.with_positions(z)
    changed = np.flatnonzero(np.abs(moved.densities() - rho) > 1e-14)
    assert changed.tolist() == [i]
    base = envelope_shifts(platoon, curve)
    env = envelope_shifts(moved, curve)
    assert env.h_plus == pytest.approx(base.h_plus, abs=1e-8)
    assert env.h_minus > base.h_minus + 0.01


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_random_perturbation_opens_gap(curve, platoon, seed):
    pert = Perturbation(0.02, "bump", seed=seed).apply(platoon, curve.left_limit, curve.rho_plus)
    assert is_monotone(pert)
    env = envelope_shifts(pert, curve)
    assert 0.0 < env.gap < np.inf


def test_balanced_weights_have_zero_sum():
    rho = np.linspace(0.3, 0.7, 41)
    s = Perturbation(0.02, "balanced").weights(rho, 0.3, 0.7)
    assert np.max(np.abs(s)) == pytest.approx(1.0)
    assert abs(np.sum(s)) <= 1e-12


def test_perturbation_rejects_unknown_pattern():
    with pytest.raises(DomainError):
        Perturbation(0.02, "wiggle")


def test_unperturbed_run_keeps_gap_closed(params):
    problem = BvpProblem(params, 0.3, 0.7)
    # rear cars start on the plateau and enter the admissible band late in the run
    curve, _ = solve_bvp(problem, plateau_tol=STABILITY_PLATEAU_TOL)
    trace = stability_run(problem, curve, None, n_periods=20)
    assert np.max(np.abs(trace.gap)) <= 1e-6


def test_perturbed_run_shrinks_gap(problem, curve, tmp_path):
    trace = stability_run(problem, curve, n_periods=8)
    assert trace.times[-1] == pytest.approx(8 * problem.t_p)
    assert np.all(trace.h_minus >= trace.h_plus)
    assert trace.reduction < 0.6
    path = tmp_path / "env.csv"
    write_envelopes_csv(path, trace)
    header, rows = read_csv(path)
    assert header == ["t", "h_plus", "h_minus", "gap"]
    assert len(rows) == trace.times.size


def test_stability_rejects_non_monotone_start(problem, curve, platoon):
    z = platoon.positions.copy()
    k = z.size // 2
    z[k] += 0.4 * (z[k + 1] - z[k])
    with pytest.raises(PreconditionError):
        stability_run(problem, curve, platoon=platoon.with_positions(z), n_periods=1)


def test_shape_checks(params, curve):
    rep = shape_checks(curve, rate_report(params, 0.3, 0.7))
    assert rep.applicable
    assert rep.rates_match(0.10)
    assert rep.asymmetric
    assert rep.x_bar is not None and rep.x_bar < 2.0


def test_shape_checks_not_applicable_for_constant(params):
    rep = shape_checks(ProfileCurve.constant(params, 0.5), rate_report(params, 0.3, 0.7))
    assert not rep.applicable


def test_inflection_bound_of_constant_is_none(params):
    assert inflection_bound(ProfileCurve.constant(params, 0.5)) is None


def test_weaker_wave_is_flatter(params):
    weak, _ = solve_bvp(BvpProblem(params, 0.4, 0.6))
    strong, _ = solve_bvp(BvpProblem(params, 0.2, 0.8))
    assert measured_slope(weak) < measured_slope(strong)
