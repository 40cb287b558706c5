from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from dynamics.DynamicsExceptions import DomainError

SEPARATRIX_ENERGY = 0.25


def _check_xi_max(xi_max: float, allow_zero: bool = False) -> None:
    lower_ok = xi_max >= 0.0 if allow_zero else xi_max > 0.0
    if not (lower_ok and xi_max <= SEPARATRIX_ENERGY):
        raise DomainError('xi_max', xi_max, '[0, 1/4]' if allow_zero else '(0, 1/4]')


@dataclass(frozen=True)
class ModelParams:
    """Control-plane coordinates of the forced, truncated quartic well.

    Attributes:
        F (float): forcing amplitude, >= 0.
        Omega (float): forcing frequency, > 0.
        Psi (float): forcing phase in radians, reduced modulo 2*pi.
        xi_max (float): truncation energy in (0, 1/4].
    """

    F: float
    Omega: float
    Psi: float = 0.0
    xi_max: float = SEPARATRIX_ENERGY

    def __post_init__(self) -> None:
        if not self.F >= 0.0:
            raise DomainError('F', self.F, '[0, inf)')
        if not self.Omega > 0.0:
            raise DomainError('Omega', self.Omega, '(0, inf)')
        _check_xi_max(self.xi_max)
        object.__setattr__(self, 'Psi', self.Psi % (2.0 * math.pi))

    @property
    def q_max(self) -> float:
        return q_max_of(self.xi_max)

    @property
    def period(self) -> float:
        """One excitation cycle T = 2*pi/Omega."""
        return 2.0 * math.pi / self.Omega

    def to_dict(self) -> dict:
        return {'F': self.F, 'Omega': self.Omega, 'Psi': self.Psi, 'xi_max': self.xi_max}


@dataclass(frozen=True)
class PhasePoint:
    """Displacement-momentum pair (q, p) with p = dq/dtau.

    Attributes:
        q (float): displacement.
        p (float): momentum.
    """

    q: float
    p: float

    def to_dict(self) -> dict:
        return {'q': self.q, 'p': self.p}


class CriterionKind(Enum):
    DISPLACEMENT = 'displacement'
    ENERGY = 'energy'


@dataclass(frozen=True)
class EscapeCriterion:
    """Max-based escape definition: escape once the monitored quantity exceeds the threshold.

    Attributes:
        kind (CriterionKind): DISPLACEMENT monitors |q| against q_max, ENERGY monitors H0 against xi_max.
        threshold (float): q_max or xi_max respectively.
    """

    kind: CriterionKind
    threshold: float

    @classmethod
    def displacement(cls, xi_max: float) -> EscapeCriterion:
        return cls(CriterionKind.DISPLACEMENT, q_max_of(xi_max))

    @classmethod
    def energy(cls, xi_max: float) -> EscapeCriterion:
        _check_xi_max(xi_max)
        return cls(CriterionKind.ENERGY, xi_max)

    @classmethod
    def of(cls, kind: CriterionKind | str, xi_max: float) -> EscapeCriterion:
        match CriterionKind(kind):
            case CriterionKind.DISPLACEMENT:
                return cls.displacement(xi_max)
            case CriterionKind.ENERGY:
                return cls.energy(xi_max)

    def measure(self, q: ArrayLike, p: ArrayLike) -> np.ndarray:
        if self.kind is CriterionKind.DISPLACEMENT:
            return np.abs(np.asarray(q, dtype=float))

        return hamiltonian_qp(q, p)

    def exceeded(self, q: ArrayLike, p: ArrayLike) -> np.ndarray:
        """Strict comparison, matching max|q| > q_max and max H0 > xi_max."""
        return self.measure(q, p) > self.threshold


@dataclass(frozen=True)
class Trajectory:
    """Sampled path of the full model; immutable once produced.

    Attributes:
        times (np.ndarray): increasing sample times.
        q (np.ndarray): displacement samples.
        p (np.ndarray): momentum samples.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        for name in ('times', 'q', 'p'):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)


def potential_full(q: ArrayLike) -> float | np.ndarray:
    """Symmetric quartic potential V(q) = q**2/2 - q**4/4 with barriers V(+-1) = 1/4."""
    q_arr = np.asarray(q, dtype=float)
    q2 = q_arr * q_arr
    values = 0.5 * q2 - 0.25 * q2 * q2

    return float(values) if np.ndim(q) == 0 else values


def q_max_of(xi_max: float) -> float:
    """Displacement at which the untruncated potential reaches xi_max.

    Raises:
        DomainError: raised when xi_max lies outside [0, 1/4] (above the barrier).
    """

    _check_xi_max(xi_max, allow_zero=True)
    # 1 - sqrt(1 - 4x) written without cancellation for small x.
    root = math.sqrt(1.0 - 4.0 * xi_max)

    return math.sqrt(4.0 * xi_max / (1.0 + root))


def potential_truncated(q: ArrayLike, xi_max: float) -> float | np.ndarray:
    """Quartic well shifted down by xi_max inside |q| < q_max and flat zero outside."""
    _check_xi_max(xi_max)
    q_cut = q_max_of(xi_max)
    q_arr = np.asarray(q, dtype=float)
    values = np.where(np.abs(q_arr) < q_cut, np.asarray(potential_full(q_arr)) - xi_max, 0.0)

    return float(values) if np.ndim(q) == 0 else values


def hamiltonian_qp(q: ArrayLike, p: ArrayLike) -> np.ndarray:
    p_arr = np.asarray(p, dtype=float)

    return 0.5 * p_arr * p_arr + np.asarray(potential_full(q))


def hamiltonian(pt: PhasePoint) -> float:
    """Unforced energy H0 = p**2/2 - q**4/4 + q**2/2."""
    return float(hamiltonian_qp(pt.q, pt.p))


def forcing(tau: ArrayLike, F: ArrayLike, Omega: ArrayLike, Psi: ArrayLike) -> np.ndarray:
    return np.asarray(F) * np.sin(np.asarray(Omega) * np.asarray(tau) + np.asarray(Psi))


def eom_rhs(pt: PhasePoint, tau: float, params: ModelParams) -> tuple[float, float]:
    """Vector field of q'' + q - q**3 = F sin(Omega*tau + Psi) in the standard Hamilton sign convention."""
    q_dot = pt.p
    p_dot = -pt.q + pt.q ** 3 + float(forcing(tau, params.F, params.Omega, params.Psi))

    return q_dot, p_dot


def escape_detect(trajectory: Trajectory, criterion: EscapeCriterion) -> float | None:
    """Returns the first sample time at which the running maximum exceeds the threshold, or None."""
    crossed = np.flatnonzero(criterion.exceeded(trajectory.q, trajectory.p))
    if crossed.size == 0:
        return None

    return float(trajectory.times[crossed[0]])


class Extent(NamedTuple):
    """Rectangle [q_min, q_max] x [p_min, p_max] of the initial-condition plane."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float

    @classmethod
    def square(cls, half_width: float = 1.0) -> Extent:
        return cls(-half_width, half_width, -half_width, half_width)

    @classmethod
    def of_well(cls, xi_max: float) -> Extent:
        """Smallest rectangle holding the sub-threshold oval H0 <= xi_max."""
        p_edge = math.sqrt(2.0 * xi_max)
        q_edge = q_max_of(xi_max)

        return cls(-q_edge, q_edge, -p_edge, p_edge)


def plane_axes(extent: Extent, resolution: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Sample coordinates of an nx-by-ny raster spanning the extent edges; arrays are indexed [iy, ix]."""
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise DomainError('resolution', resolution, 'at least 2 x 2')

    q = np.linspace(extent.q_min, extent.q_max, nx)
    p = np.linspace(extent.p_min, extent.p_max, ny)

    return np.meshgrid(q, p)


def in_well(q: ArrayLike, p: ArrayLike, xi_max: float) -> np.ndarray:
    """States strictly inside the truncated well: H0 < xi_max and |q| < q_max."""
    return (hamiltonian_qp(q, p) < xi_max) & (np.abs(np.asarray(q, dtype=float)) < q_max_of(xi_max))
