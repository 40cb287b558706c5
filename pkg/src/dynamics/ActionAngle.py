"""Action-angle transform of the unforced quartic well and the averaged couplings J and G.

Energies are restricted to the well, 0 <= E < 1/4; the separatrix E = 1/4 is
only admitted by action_of_energy, as a limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike

from dynamics.DynamicsExceptions import DomainError
from dynamics.Elliptic import K_CLAMP, K_MAX, ellint_E, ellint_F, ellint_K, jacobi_sn_cn_dn
from dynamics.Model import SEPARATRIX_ENERGY, PhasePoint, hamiltonian_qp

ACTION_SCALE = 2.0 * math.sqrt(2.0) / (3.0 * math.pi)

# Largest energy callers may pass before the separatrix.
SEPARATRIX_MARGIN = 1e-9

# Tolerance on |q| beyond the turning point accepted by angle_of_state.
TURNING_POINT_SLACK = 1e-9

FOURIER_SAMPLES = 256


class CouplingKind(Enum):
    CLOSED_FORM = 'closed_form'
    FOURIER = 'fourier'


@dataclass(frozen=True)
class EnergyShape:
    """Orbit shape parameters of the unforced well at energy E.

    Attributes:
        E (float | np.ndarray): energy in [0, 1/4).
        mu (float | np.ndarray): sqrt(1 - 4E).
        k (float | np.ndarray): elliptic modulus sqrt((1 - mu)/(1 + mu)).
        amplitude (float | np.ndarray): turning-point displacement sqrt(1 - mu).
    """

    E: float | np.ndarray
    mu: float | np.ndarray
    k: float | np.ndarray
    amplitude: float | np.ndarray


@dataclass(frozen=True)
class SlowState:
    """Coordinates on the resonance-manifold cylinder.

    Attributes:
        gamma (float): slow phase theta - Psi - Omega*tau, reduced modulo 2*pi.
        xi (float): averaged energy, strictly below the separatrix energy 1/4.
    """

    gamma: float
    xi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.xi < SEPARATRIX_ENERGY:
            raise DomainError('xi', self.xi, '[0, 1/4)')
        object.__setattr__(self, 'gamma', self.gamma % (2.0 * math.pi))

    def to_dict(self) -> dict:
        return {'gamma': self.gamma, 'xi': self.xi}


def _output(values: np.ndarray, *inputs: ArrayLike) -> float | np.ndarray:
    if all(np.ndim(value) == 0 for value in inputs):
        return float(values)

    return values


def _energies(E: ArrayLike, upper: float, closed: bool) -> np.ndarray:
    e_arr = np.asarray(E, dtype=float)
    bad = ~np.isfinite(e_arr) | (e_arr < 0.0) | ((e_arr > upper) if closed else (e_arr >= upper))
    if np.any(bad):
        raise DomainError('E', float(e_arr[bad].flat[0]), f'[0, {upper!r}]' if closed else f'[0, {upper!r})')

    return e_arr


def _shape(e_arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (mu, 1 - mu, k, clamped k) for validated energies."""
    mu = np.sqrt(np.maximum(1.0 - 4.0 * e_arr, 0.0))
    one_minus_mu = 4.0 * e_arr / (1.0 + mu)
    k = np.sqrt(one_minus_mu / (1.0 + mu))

    return mu, one_minus_mu, k, np.minimum(k, K_CLAMP)


def energy_shape(E: ArrayLike) -> EnergyShape:
    e_arr = _energies(E, SEPARATRIX_ENERGY, closed=False)
    mu, one_minus_mu, k, _ = _shape(e_arr)

    return EnergyShape(_output(e_arr, E), _output(mu, E), _output(k, E), _output(np.sqrt(one_minus_mu), E))


def action_of_energy(E: ArrayLike) -> float | np.ndarray:
    """Action I(E) of the unforced orbit; at E = 1/4 the separatrix limit 2*sqrt(2)/(3*pi)."""
    e_arr = _energies(E, SEPARATRIX_ENERGY, closed=True)
    mu, _, _, k_eval = _shape(e_arr)
    # mu*K(k) -> 0 at the separatrix: mu vanishes faster than K diverges.
    values = ACTION_SCALE * np.sqrt(1.0 + mu) * (np.asarray(ellint_E(k_eval)) - mu * np.asarray(ellint_K(k_eval)))

    return _output(values, E)


def angle_frequency(E: ArrayLike) -> float | np.ndarray:
    """Orbital angular frequency dE/dI, equal to 1 at the bottom of the well and vanishing at the separatrix."""
    e_arr = _energies(E, SEPARATRIX_ENERGY, closed=False)
    mu, _, _, k_eval = _shape(e_arr)
    values = np.pi * np.sqrt(1.0 + mu) / (2.0 * math.sqrt(2.0) * np.asarray(ellint_K(k_eval)))

    return _output(values, E)


def _jacobi_at_angle(theta: ArrayLike, e_arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    mu, one_minus_mu, _, k_eval = _shape(e_arr)
    u = 2.0 * np.asarray(theta, dtype=float) * np.asarray(ellint_K(k_eval)) / np.pi
    sn, cn, dn = jacobi_sn_cn_dn(u, k_eval)

    return np.asarray(sn), np.asarray(cn), np.asarray(dn), mu, one_minus_mu


def q_of_angle(theta: ArrayLike, E: ArrayLike) -> float | np.ndarray:
    """Displacement on the unforced orbit of energy E at angle theta (2*pi-periodic, odd in theta)."""
    e_arr = _energies(E, SEPARATRIX_ENERGY, closed=False)
    sn, _, _, _, one_minus_mu = _jacobi_at_angle(theta, e_arr)

    return _output(np.sqrt(one_minus_mu) * sn, theta, E)


def p_of_angle(theta: ArrayLike, E: ArrayLike) -> float | np.ndarray:
    """Momentum on the unforced orbit of energy E at angle theta; vanishes at the turning point theta = pi/2."""
    e_arr = _energies(E, SEPARATRIX_ENERGY, closed=False)
    _, cn, dn, mu, _ = _jacobi_at_angle(theta, e_arr)

    return _output(np.sqrt(0.5 * (1.0 - mu) * (1.0 + mu)) * cn * dn, theta, E)


def angle_of_state_arrays(q: ArrayLike, p: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized angle_of_state returning arrays (theta, E).

    Raises:
        DomainError: raised for states outside the well or on/above the separatrix.
    """

    q_arr, p_arr = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(p, dtype=float))
    e_arr = _energies(hamiltonian_qp(q_arr, p_arr), SEPARATRIX_ENERGY, closed=False)
    mu, one_minus_mu, _, k_eval = _shape(e_arr)
    amplitude = np.sqrt(one_minus_mu)

    outside = np.abs(q_arr) > amplitude * (1.0 + TURNING_POINT_SLACK) + TURNING_POINT_SLACK
    if np.any(outside):
        raise DomainError('q', float(q_arr[outside].flat[0]), '|q| <= turning-point amplitude of the well')

    degenerate = e_arr == 0.0
    safe_amplitude = np.where(degenerate, 1.0, amplitude)
    s = np.clip(q_arr / safe_amplitude, -1.0, 1.0)
    ks = k_eval * s
    dn = np.sqrt((1.0 - ks) * (1.0 + ks))
    p_scale = np.where(degenerate, 1.0, np.sqrt(0.5 * (1.0 - mu) * (1.0 + mu)))
    cn = p_arr / (p_scale * dn)

    # Amplitude angle with its quadrant taken from the signs of (sn, cn).
    phi = np.arctan2(s, cn)
    theta = np.pi * np.asarray(ellint_F(phi, k_eval)) / (2.0 * np.asarray(ellint_K(k_eval)))
    theta = np.where(degenerate, 0.0, np.mod(theta, 2.0 * np.pi))
    theta = np.where(theta >= 2.0 * np.pi, 0.0, theta)

    return theta, e_arr


def angle_of_state(pt: PhasePoint) -> tuple[float, float]:
    """Returns (theta, E) of an in-well state, with theta in [0, 2*pi) and theta = 0 at (0, p > 0)."""
    theta, energy = angle_of_state_arrays(pt.q, pt.p)

    return float(theta), float(energy)


def _half_nome(k: np.ndarray, k_eval: np.ndarray) -> np.ndarray:
    """exp(-pi K(k') / (2 K(k))), i.e. the square root of the nome."""
    kp = np.sqrt((1.0 - k) * (1.0 + k))
    # For k' -> 1 the nome tends to k**2/16.
    tiny = kp >= K_MAX
    kp_eval = np.where(tiny, 0.0, kp)
    exact = np.exp(-np.pi * np.asarray(ellint_K(kp_eval)) / (2.0 * np.asarray(ellint_K(k_eval))))

    return np.where(tiny, 0.25 * k, exact)


def coupling_G_closed_form(xi: ArrayLike) -> float | np.ndarray:
    e_arr = _energies(xi, SEPARATRIX_ENERGY, closed=False)
    mu, _, k, k_eval = _shape(e_arr)
    values = np.pi * np.sqrt(1.0 + mu) / np.asarray(ellint_K(k_eval)) * _half_nome(k, k_eval)

    return _output(np.where(e_arr == 0.0, 0.0, values), xi)


def fourier_sine_coefficient(xi: ArrayLike, samples: int = FOURIER_SAMPLES) -> float | np.ndarray:
    """First sine coefficient (1/pi) * integral_0^{2pi} q(theta, xi) sin(theta) dtheta by the periodic trapezoid rule."""
    e_arr = _energies(xi, SEPARATRIX_ENERGY, closed=False)
    theta = 2.0 * np.pi * np.arange(samples) / samples
    q = np.asarray(q_of_angle(theta[np.newaxis, :], e_arr.reshape(-1, 1)))
    values = (2.0 / samples) * (q @ np.sin(theta))

    return _output(values.reshape(e_arr.shape), xi)


def coupling_G_fourier(xi: ArrayLike) -> float | np.ndarray:
    """Coupling built from the exact first harmonic: half the first sine coefficient of q(theta)."""
    return _output(0.5 * np.asarray(fourier_sine_coefficient(xi)), xi)


def coupling_G(xi: ArrayLike, kind: CouplingKind = CouplingKind.CLOSED_FORM) -> float | np.ndarray:
    """Averaged forcing coupling G(xi); zero at the bottom of the well, positive inside it."""
    match kind:
        case CouplingKind.CLOSED_FORM:
            return coupling_G_closed_form(xi)
        case CouplingKind.FOURIER:
            return coupling_G_fourier(xi)


def coupling_deviation(xi: ArrayLike) -> float | np.ndarray:
    """Relative deviation of the closed-form coupling from the Fourier one, (G_closed - G_fourier)/G_fourier."""
    closed = np.asarray(coupling_G_closed_form(xi))
    fourier = np.asarray(coupling_G_fourier(xi))

    return _output(closed / fourier - 1.0, xi)


def _five_point(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    h = np.minimum(1e-4, np.minimum(x, SEPARATRIX_ENERGY - x) / 4.0)
    f = lambda offset: np.asarray(fn(x + offset * h))

    return (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * h)


def coupling_G_derivative(xi: ArrayLike, kind: CouplingKind = CouplingKind.CLOSED_FORM) -> float | np.ndarray:
    """dG/dxi by a five-point stencil shrunk near the ends of (0, 1/4)."""
    e_arr = _energies(xi, SEPARATRIX_ENERGY, closed=False)
    if np.any(e_arr <= 0.0):
        raise DomainError('xi', float(e_arr[e_arr <= 0.0].flat[0]), '(0, 1/4): dG/dxi diverges at xi = 0')

    return _output(_five_point(lambda x: coupling_G(x, kind), e_arr), xi)


def angle_frequency_derivative(xi: ArrayLike) -> float | np.ndarray:
    e_arr = _energies(xi, SEPARATRIX_ENERGY, closed=False)
    if np.any(e_arr <= 0.0):
        raise DomainError('xi', float(e_arr[e_arr <= 0.0].flat[0]), '(0, 1/4)')

    return _output(_five_point(angle_frequency, e_arr), xi)


def slow_coords_of_ic(pt: PhasePoint, Psi: float) -> SlowState:
    """Cylinder coordinates of an initial condition at tau = 0: (theta(pt) - Psi, H0(pt))."""
    theta, energy = angle_of_state(pt)

    return SlowState(theta - Psi, energy)


def slow_coords_arrays(q: ArrayLike, p: ArrayLike, Psi: float) -> tuple[np.ndarray, np.ndarray]:
    theta, energy = angle_of_state_arrays(q, p)

    return np.mod(theta - Psi, 2.0 * np.pi), energy


def phase_point_of_slow(s: SlowState, Psi: float) -> PhasePoint:
    """Inverse of slow_coords_of_ic: the in-well state with angle gamma + Psi and energy xi."""
    theta = s.gamma + Psi

    return PhasePoint(float(q_of_angle(theta, s.xi)), float(p_of_angle(theta, s.xi)))
