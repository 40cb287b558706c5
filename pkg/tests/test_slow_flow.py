import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dynamics.ActionAngle import SlowState, action_of_energy, angle_frequency, coupling_G
from dynamics.DynamicsExceptions import DomainError
from resonance.SlowFlow import (RESIDUAL_TOL, FirstIntegralContext, MechanismKind, C_of, C_value, dC_dgamma,
                                dC_dxi, classify_mechanism, default_xi_dag_grid, fcr_envelope, fcr_mm,
                                fcr_sm_curve, find_saddle, find_saddles, hessian_det, reaches_truncation,
                                slow_rhs, slow_rhs_arrays, sm_residuals)
from simulation.WorkerPool import WorkerPool

ZERO_IC = SlowState(0.0, 0.0)
COEXISTING = FirstIntegralContext(F=0.0478, Omega=0.76)


def test_context_validation():
    with pytest.raises(DomainError):
        FirstIntegralContext(F=-0.1, Omega=0.9)
    with pytest.raises(DomainError):
        FirstIntegralContext(F=0.1, Omega=0.0)


def test_first_integral_without_forcing():
    ctx = FirstIntegralContext(F=0.0, Omega=0.9)
    xi = np.linspace(0.01, 0.24, 20)
    expected = xi - 0.9 * np.asarray(action_of_energy(xi))
    assert np.allclose(C_of(1.3, xi, ctx), expected, rtol=0.0, atol=1e-15)
    assert C_value(SlowState(2.0, 0.1), ctx) == pytest.approx(0.1 - 0.9 * action_of_energy(0.1), abs=1e-15)


def test_first_integral_is_zero_at_bottom_of_well():
    assert C_value(ZERO_IC, FirstIntegralContext(F=0.05, Omega=0.8)) == 0.0


def test_first_integral_broadcasts():
    gamma, xi = np.meshgrid(np.linspace(0.0, 2.0 * math.pi, 7), np.linspace(0.01, 0.2, 5), indexing='ij')
    assert C_of(gamma, xi, COEXISTING).shape == (7, 5)


@pytest.mark.parametrize('gamma', [0.0, 1.0, math.pi, 4.5])
def test_xi_derivative_matches_finite_difference(gamma):
    xi = np.linspace(0.02, 0.23, 15)
    h = 1e-6
    difference = (C_of(gamma, xi + h, COEXISTING) - C_of(gamma, xi - h, COEXISTING)) / (2.0 * h)
    assert np.allclose(dC_dxi(gamma, xi, COEXISTING), difference, rtol=0.0, atol=1e-6)


def test_gamma_derivative_matches_finite_difference():
    gamma = np.linspace(0.0, 2.0 * math.pi, 13)
    h = 1e-6
    difference = (C_of(gamma + h, 0.15, COEXISTING) - C_of(gamma - h, 0.15, COEXISTING)) / (2.0 * h)
    assert np.allclose(dC_dgamma(gamma, 0.15, COEXISTING), difference, rtol=0.0, atol=1e-8)


def test_unforced_flow_detunes_phase_only():
    ctx = FirstIntegralContext(F=0.0, Omega=0.8)
    gamma_dot, xi_dot = slow_rhs(SlowState(0.7, 0.12), ctx)
    assert gamma_dot == pytest.approx(angle_frequency(0.12) - 0.8, abs=1e-14)
    assert xi_dot == 0.0


def test_slow_rhs_rejects_states_at_separatrix():
    with pytest.raises(DomainError):
        slow_rhs(SlowState(0.0, 0.25 - 1e-12), COEXISTING)
    with pytest.raises(DomainError):
        slow_rhs_arrays(np.zeros(2), np.array([0.1, 0.0]), COEXISTING)


def test_slow_flow_conserves_first_integral(rng):
    ctx = FirstIntegralContext(F=0.005, Omega=0.9)
    count = 10
    gamma0 = rng.uniform(0.0, 2.0 * math.pi, count)
    xi0 = rng.uniform(0.06, 0.14, count)

    def rhs(_, y):
        gamma_dot, xi_dot = slow_rhs_arrays(y[:count], y[count:], ctx)
        return np.concatenate([gamma_dot, xi_dot])

    solution = solve_ivp(rhs, (0.0, 200.0), np.concatenate([gamma0, xi0]), method='DOP853', rtol=1e-11, atol=1e-12)
    assert solution.success
    final = solution.y[:, -1]
    drift = C_of(final[:count], final[count:], ctx) - C_of(gamma0, xi0, ctx)
    assert np.max(np.abs(drift)) < 1e-8


def test_no_saddle_without_forcing():
    assert find_saddle(FirstIntegralContext(F=0.0, Omega=0.76)) is None
    assert find_saddles(FirstIntegralContext(F=0.0, Omega=0.76)) == []


def test_saddle_in_coexisting_regime():
    saddle = find_saddle(COEXISTING)
    assert saddle is not None
    assert saddle.gamma_dag == 0.0
    assert 0.0 < saddle.xi_dag < 0.235
    assert abs(float(dC_dxi(saddle.gamma_dag, saddle.xi_dag, COEXISTING))) < 1e-10
    assert hessian_det(saddle.gamma_dag, saddle.xi_dag, COEXISTING) < 0.0
    assert saddle.C_value == pytest.approx(C_of(saddle.gamma_dag, saddle.xi_dag, COEXISTING), abs=1e-15)


def test_saddles_are_ordered_by_energy():
    saddles = find_saddles(COEXISTING)
    xis = [saddle.xi_dag for saddle in saddles]
    assert xis == sorted(xis)


@pytest.mark.parametrize('Omega, gamma_star', [(0.5, 0.0), (1.1, math.pi)])
def test_mm_threshold_from_bottom_of_well(Omega, gamma_star):
    xi_max = 0.15
    threshold = fcr_mm(Omega, ZERO_IC, xi_max)
    expected = abs(Omega * action_of_energy(xi_max) - xi_max) / coupling_G(xi_max)
    assert threshold.gamma_star == gamma_star
    assert threshold.F_cr == pytest.approx(expected, rel=1e-12)

    ctx = FirstIntegralContext(threshold.F_cr, Omega)
    assert C_of(gamma_star, xi_max, ctx) == pytest.approx(0.0, abs=1e-14)


def test_mm_threshold_is_zero_above_truncation():
    threshold = fcr_mm(0.9, SlowState(0.0, 0.2), 0.15)
    assert threshold.F_cr == 0.0


def test_mm_threshold_rejects_truncation_at_separatrix():
    with pytest.raises(DomainError):
        fcr_mm(0.9, ZERO_IC, 0.25)


def test_truncation_reached_only_past_threshold():
    Omega, xi_max = 1.1, 0.15
    threshold = fcr_mm(Omega, ZERO_IC, xi_max).F_cr
    assert not reaches_truncation(0.0, Omega, ZERO_IC, xi_max)
    assert not reaches_truncation(0.99 * threshold, Omega, ZERO_IC, xi_max)
    assert reaches_truncation(1.01 * threshold, Omega, ZERO_IC, xi_max)


def test_truncation_reached_from_outside():
    assert reaches_truncation(0.0, 0.9, SlowState(1.0, 0.2), 0.15)


def test_saddle_mechanism_curve():
    xi_max = 0.242
    curve = fcr_sm_curve(default_xi_dag_grid(xi_max), ZERO_IC, xi_max)
    assert curve
    for point in curve:
        assert point.gamma_dag == 0.0
        assert point.F_cr > 0.0
        assert 0.0 < point.Omega < 1.0
        assert max(abs(value) for value in sm_residuals(point, ZERO_IC)) <= RESIDUAL_TOL
        ctx = FirstIntegralContext(point.F_cr, point.Omega)
        assert hessian_det(point.gamma_dag, point.xi_dag, ctx) < 0.0


def test_saddle_mechanism_curve_skips_energies_above_truncation():
    assert fcr_sm_curve([0.2, 0.3], ZERO_IC, 0.15) == []


def test_default_saddle_grid_stays_inside_truncation():
    grid = default_xi_dag_grid(0.2, size=50)
    assert len(grid) == 50
    assert grid[0] > 0.0
    assert grid[-1] < 0.2


def test_mechanism_classification():
    assert classify_mechanism(0.5, ZERO_IC, 0.15) is MechanismKind.SMM
    assert classify_mechanism(1.1, ZERO_IC, 0.15) is MechanismKind.MM
    assert classify_mechanism(0.9, ZERO_IC, 0.15, F=0.0) is MechanismKind.MM


def test_envelope_dips_below_linear_resonance():
    omegas = np.linspace(0.6, 1.2, 31)
    envelope = fcr_envelope(omegas, ZERO_IC, 0.242)
    assert [point.Omega for point in envelope] == pytest.approx(list(omegas))

    F = np.array([point.F_cr for point in envelope])
    assert np.all(F > 0.0)
    lowest = int(np.argmin(F))
    assert 0.8 < envelope[lowest].Omega < 1.0
    assert F[lowest] < 0.5 * min(F[0], F[-1])

    mechanisms = {point.mechanism for point in envelope}
    assert MechanismKind.SM in mechanisms
    assert envelope[-1].mechanism is MechanismKind.MM


def test_envelope_reaches_truncation_at_threshold():
    xi_max = 0.242
    for point in fcr_envelope((0.7, 0.9, 1.1), ZERO_IC, xi_max):
        assert reaches_truncation(1.001 * point.F_cr, point.Omega, ZERO_IC, xi_max)
        assert not reaches_truncation(0.999 * point.F_cr, point.Omega, ZERO_IC, xi_max)


def test_shallower_well_moves_dip_towards_resonance():
    omegas = np.linspace(0.6, 1.2, 61)
    lowest = lambda envelope: min(envelope, key=lambda point: point.F_cr).Omega
    assert lowest(fcr_envelope(omegas, ZERO_IC, 0.15)) >= lowest(fcr_envelope(omegas, ZERO_IC, 0.242))


def test_envelope_with_worker_pool_matches_inline():
    omegas = np.linspace(0.8, 1.0, 5)
    with WorkerPool(2) as pool:
        pooled = fcr_envelope(omegas, ZERO_IC, 0.2, pool=pool)
    assert pooled == fcr_envelope(omegas, ZERO_IC, 0.2)
