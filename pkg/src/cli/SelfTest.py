"""Invariant checks run by the selftest subcommand.

Each check evaluates one identity on seeded random or gridded inputs and
reports the worst deviation against its tolerance.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from dynamics.ActionAngle import (action_of_energy, angle_frequency, angle_of_state_arrays, coupling_deviation,
                                  p_of_angle, q_of_angle)
from dynamics.Elliptic import complementary_modulus, ellint_E, ellint_F, ellint_K, jacobi_sn_cn_dn
from dynamics.Model import hamiltonian_qp
from resonance.SlowFlow import C_of, FirstIntegralContext, slow_rhs_arrays

logger = logging.getLogger(__name__)

SELFTEST_SEED = 20240229
JACOBI_TOLERANCE = 1e-12
LEGENDRE_TOLERANCE = 1e-12
COMPLETE_TOLERANCE = 1e-13
ENERGY_TOLERANCE = 1e-10
ROUND_TRIP_TOLERANCE = 1e-9
DERIVATIVE_TOLERANCE = 1e-6
CONSERVATION_TOLERANCE = 1e-8
COUPLING_TOLERANCE = 1e-10

# Slow-flow run: weak forcing keeps every orbit well inside the cylinder.
FLOW_STATES = 100
FLOW_HORIZON = 1000.0
FLOW_CONTEXT = FirstIntegralContext(F=0.002, Omega=0.9)
FLOW_XI_RANGE = (0.08, 0.14)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _result(name: str, deviation: float, tolerance: float) -> CheckResult:
    passed = bool(deviation <= tolerance)

    return CheckResult(name, passed, f'max deviation {deviation:.3e} (tolerance {tolerance:.0e})')


def check_jacobi_identities(rng: np.random.Generator) -> CheckResult:
    u = rng.uniform(-20.0, 20.0, 10_000)
    k = rng.uniform(0.0, 0.999, 10_000)
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    deviation = max(np.max(np.abs(sn ** 2 + cn ** 2 - 1.0)), np.max(np.abs(dn ** 2 + k ** 2 * sn ** 2 - 1.0)))

    return _result('jacobi identities', float(deviation), JACOBI_TOLERANCE)


def check_legendre_relation(rng: np.random.Generator) -> CheckResult:
    k = rng.uniform(0.01, 0.99, 1000)
    kp = complementary_modulus(k)
    K, E, Kp, Ep = ellint_K(k), ellint_E(k), ellint_K(kp), ellint_E(kp)
    deviation = np.max(np.abs(E * Kp + Ep * K - K * Kp - 0.5 * math.pi))

    return _result('legendre relation', float(deviation), LEGENDRE_TOLERANCE)


def check_complete_limit(rng: np.random.Generator) -> CheckResult:
    k = rng.uniform(0.0, 0.99, 1000)
    deviation = np.max(np.abs(ellint_F(0.5 * math.pi, k) - ellint_K(k)))

    return _result('F(pi/2, k) = K(k)', float(deviation), COMPLETE_TOLERANCE)


def check_energy_identity(rng: np.random.Generator) -> CheckResult:
    theta, E = np.meshgrid(np.linspace(0.0, 2.0 * math.pi, 40, endpoint=False), np.linspace(0.001, 0.249, 25))
    q, p = q_of_angle(theta, E), p_of_angle(theta, E)
    deviation = np.max(np.abs(hamiltonian_qp(q, p) - E))

    return _result('energy identity', float(deviation), ENERGY_TOLERANCE)


def check_angle_round_trip(rng: np.random.Generator) -> CheckResult:
    theta = rng.uniform(0.0, 2.0 * math.pi, 1000)
    E = rng.uniform(0.001, 0.24, 1000)
    theta_back, E_back = angle_of_state_arrays(q_of_angle(theta, E), p_of_angle(theta, E))
    wrapped = np.abs(np.angle(np.exp(1j * (theta_back - theta))))
    deviation = max(np.max(wrapped), np.max(np.abs(E_back - E)))

    return _result('angle round trip', float(deviation), ROUND_TRIP_TOLERANCE)


def check_action_derivative(rng: np.random.Generator) -> CheckResult:
    """dI/dE from a centred difference of the action against the inverse angle frequency."""
    E = np.linspace(0.01, 0.24, 50)
    h = 1e-5
    stencil = (-action_of_energy(E + 2 * h) + 8 * action_of_energy(E + h)
               - 8 * action_of_energy(E - h) + action_of_energy(E - 2 * h)) / (12.0 * h)
    deviation = np.max(np.abs(stencil * angle_frequency(E) - 1.0))

    return _result('action derivative', float(deviation), DERIVATIVE_TOLERANCE)


def check_coupling_deviation(rng: np.random.Generator) -> CheckResult:
    """The closed-form coupling sits below the first harmonic by exactly the nome of the orbit."""
    xi = np.linspace(0.02, 0.24, 23)
    mu = np.sqrt(1.0 - 4.0 * xi)
    k = np.sqrt((1.0 - mu) / (1.0 + mu))
    nome = np.exp(-math.pi * ellint_K(complementary_modulus(k)) / ellint_K(k))
    deviation = np.max(np.abs(coupling_deviation(xi) + nome))

    return _result('coupling deviation', float(deviation), COUPLING_TOLERANCE)


def check_slow_flow_conservation(rng: np.random.Generator) -> CheckResult:
    gamma0 = rng.uniform(0.0, 2.0 * math.pi, FLOW_STATES)
    xi0 = rng.uniform(*FLOW_XI_RANGE, FLOW_STATES)

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        gamma_dot, xi_dot = slow_rhs_arrays(y[:FLOW_STATES], y[FLOW_STATES:], FLOW_CONTEXT)
        return np.concatenate([gamma_dot, xi_dot])

    solution = solve_ivp(rhs, (0.0, FLOW_HORIZON), np.concatenate([gamma0, xi0]), method='DOP853',
                         rtol=1e-12, atol=1e-12, max_step=1.0)
    if not solution.success:
        return CheckResult('slow-flow conservation', False, solution.message)

    final = solution.y[:, -1]
    drift = np.abs(C_of(final[:FLOW_STATES], final[FLOW_STATES:], FLOW_CONTEXT) - C_of(gamma0, xi0, FLOW_CONTEXT))

    return _result('slow-flow conservation', float(np.max(drift)), CONSERVATION_TOLERANCE)


CHECKS: tuple[Callable[[np.random.Generator], CheckResult], ...] = (
    check_jacobi_identities,
    check_legendre_relation,
    check_complete_limit,
    check_energy_identity,
    check_angle_round_trip,
    check_action_derivative,
    check_coupling_deviation,
    check_slow_flow_conservation,
)


def run_selftest(seed: int = SELFTEST_SEED) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        result = check(rng)
        logger.info('%s: %s', result.name, result.detail)
        results.append(result)

    return results
