import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftlwave.diagnostics import covering_platoon
from ftlwave.errors import DomainError, HorizonError, StepSizeError
from ftlwave.model import ModelParams
from ftlwave.profile import ProfileCurve
from ftlwave.simulator import (
    LeaderRule,
    Platoon,
    density_field,
    generate_distribution,
    local_density,
    measure_period,
    simulate,
    trace_error,
    trace_error_series,
    write_cars_csv,
)


def uniform(params, rho, n):
    return Platoon(np.arange(n) * params.ell / rho, params, LeaderRule.constant(rho))


@pytest.mark.parametrize(
    "ell,z,expected",
    [(0.5, [0, 0.5], 1.0), (0.5, [0, 1.0], 0.5), (0.1, [0, 0.25], 0.4)],
)
def test_local_density(ell, z, expected):
    p = ModelParams(ell)
    assert local_density(Platoon(np.array(z, float), p, LeaderRule.frozen()), 0) == pytest.approx(expected)


def test_platoon_rejects_overlap():
    with pytest.raises(DomainError):
        Platoon(np.array([0.0, 0.4]), ModelParams(0.5), LeaderRule.frozen())


def test_frozen_leader_bumper_to_bumper_stays_put():
    p = ModelParams(0.5)
    pl = Platoon(np.array([0.0, 0.5]), p, LeaderRule.frozen())
    traj = simulate(pl, 0.05, 2.0)
    assert np.all(traj.positions == pl.positions)


def test_uniform_platoon_translates_exactly():
    p = ModelParams(0.5)
    rho = 0.4
    pl = uniform(p, rho, 20)
    t_p = p.ell / float(p.flux(rho))
    traj = simulate(pl, 0.05, 10 * t_p, stride=50)
    shift = traj.positions[-1] - traj.positions[0]
    assert np.allclose(shift, float(p.speed(rho)) * traj.times[-1], atol=1e-10)
    assert np.max(np.abs(traj.densities - rho)) < 1e-10


def test_step_size_guard():
    p = ModelParams(0.5)
    with pytest.raises(StepSizeError):
        simulate(uniform(p, 0.5, 3), 0.06, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=2, max_size=15), st.floats(0.05, 1.0))
def test_ordering_invariant_random_platoons(rhos, lead):
    p = ModelParams(0.5)
    z = np.concatenate([[0.0], np.cumsum(p.ell / np.array(rhos))])
    traj = simulate(Platoon(z, p, LeaderRule.constant(lead)), 0.05, 3.0)
    assert np.all(np.diff(traj.positions, axis=1) >= p.ell * (1 - 1e-12))
    assert np.all(traj.densities <= 1.0 + 1e-12)


def test_density_field():
    p = ModelParams(0.5)
    f = density_field(Platoon(np.array([0.0, 2.0]), p, LeaderRule.frozen()))
    assert f.intervals() == [(0.0, 2.0, 0.25)]
    g = density_field(Platoon(np.arange(5) * 1.0, p, LeaderRule.frozen()))
    assert np.all(g.values == 0.5)


def test_generate_distribution_constant_curves():
    p = ModelParams(0.5)
    half = ProfileCurve.constant(p, 0.5, -10, 10)
    pl = generate_distribution(half, 0.0, 0, 3)
    assert np.allclose(pl.positions, [0, 1, 2, 3])
    full = ProfileCurve.constant(p, 1.0, -10, 10)
    pl = generate_distribution(full, 0.0, 2, 2)
    assert np.allclose(np.diff(pl.positions), p.ell)


def test_generated_platoon_identity_and_monotone_field(curve):
    p = curve.params
    pl = generate_distribution(curve, 0.0, 30, 10)
    z = pl.positions
    resid = z[:-1] + p.ell / curve.sample(z[:-1]) - z[1:]
    assert np.max(np.abs(resid)) < 1e-10
    assert np.all(np.diff(density_field(pl).values) >= -1e-12)


def test_trace_error_zero_at_start_and_small_over_a_period(curve, problem):
    pl = covering_platoon(curve, extra_back=3)
    traj = simulate(pl, problem.t_p / 60, problem.t_p, stride=6)
    series = trace_error_series(traj, curve)
    assert series[0] < 1e-12
    assert trace_error(traj, curve) < 1e-3


def test_trace_error_constant_state():
    p = ModelParams(0.5)
    pl = uniform(p, 0.3, 8)
    traj = simulate(pl, 0.05, 5.0)
    assert trace_error(traj, ProfileCurve.constant(p, 0.3, -100, 100)) < 1e-12


def test_period_constant_state():
    p = ModelParams(0.5)
    rho = 0.3
    t_p = p.ell / float(p.flux(rho))
    traj = simulate(uniform(p, rho, 6), t_p / 100, 1.2 * t_p)
    rep = measure_period(traj, ProfileCurve.constant(p, rho, -100, 100))
    assert np.allclose(rep.event_times, t_p, rtol=1e-9)
    assert np.allclose(rep.quadrature_times, t_p, rtol=1e-9)


def test_period_of_profile_platoon(curve, problem):
    pl = covering_platoon(curve, extra_back=2)
    traj = simulate(pl, problem.t_p / 200, 1.5 * problem.t_p)
    rep = measure_period(traj, curve)
    assert problem.t_p == pytest.approx(0.5 / 0.21)
    assert rep.mean == pytest.approx(problem.t_p, rel=1e-6)
    assert np.allclose(rep.quadrature_times, problem.t_p, rtol=1e-6)
    assert rep.relative_spread < 1e-3


def test_period_needs_long_enough_run():
    p = ModelParams(0.5)
    traj = simulate(uniform(p, 0.3, 4), 0.05, 0.5)
    with pytest.raises(HorizonError):
        measure_period(traj, ProfileCurve.constant(p, 0.3, -100, 100))


def test_cars_csv_layout(tmp_path):
    p = ModelParams(0.5)
    traj = simulate(uniform(p, 0.5, 3), 0.05, 0.1, stride=1)
    write_cars_csv(tmp_path / "cars.csv", traj)
    lines = (tmp_path / "cars.csv").read_text().splitlines()
    assert lines[0] == "t,i,z,rho"
    assert len(lines) == 1 + 3 * 3
    assert lines[3].split(",")[3] == "0.5"
