"""Averaged 1:1 resonance dynamics on the (gamma, xi) cylinder.

The first integral is C(gamma, xi) = -F G(xi) cos(gamma) - Omega J(xi) + xi
with J the action of the unforced orbit of energy xi. Critical points lie on
the lines cos(gamma) = +-1, which is where saddles and tangencies are sought.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq, newton

from dynamics.ActionAngle import (SEPARATRIX_MARGIN, CouplingKind, SlowState,
                                  action_of_energy, angle_frequency,
                                  angle_frequency_derivative, coupling_G,
                                  coupling_G_derivative)
from dynamics.DynamicsExceptions import DomainError
from dynamics.Model import SEPARATRIX_ENERGY

logger = logging.getLogger(__name__)

XI_FLOOR = 1e-6
XI_CEILING = SEPARATRIX_ENERGY - SEPARATRIX_MARGIN
SCAN_POINTS = 200
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
RESIDUAL_TOL = 1e-9
# Relative and absolute offset above a candidate threshold at which escape is confirmed.
REACH_SLACK = 1e-7


@dataclass(frozen=True)
class FirstIntegralContext:
    """Forcing seen by the slow flow.

    Attributes:
        F (float): forcing amplitude, >= 0.
        Omega (float): forcing frequency, > 0.
        coupling (CouplingKind): which expression of G(xi) to use.
    """

    F: float
    Omega: float
    coupling: CouplingKind = CouplingKind.CLOSED_FORM

    def __post_init__(self) -> None:
        if not self.F >= 0.0:
            raise DomainError('F', self.F, '[0, inf)')
        if not self.Omega > 0.0:
            raise DomainError('Omega', self.Omega, '(0, inf)')


class SaddlePoint(NamedTuple):
    gamma_dag: float
    xi_dag: float
    C_value: float


class MechanismKind(Enum):
    MM = 'MM'
    SM = 'SM'
    SMM = 'SMM'


class MMThreshold(NamedTuple):
    F_cr: float
    gamma_star: float


class SMPoint(NamedTuple):
    xi_dag: float
    gamma_dag: float
    Omega: float
    F_cr: float


class EnvelopePoint(NamedTuple):
    Omega: float
    F_cr: float
    mechanism: MechanismKind


def _check_interior(xi: ArrayLike) -> np.ndarray:
    xi_arr = np.asarray(xi, dtype=float)
    bad = ~((xi_arr > 0.0) & (xi_arr < SEPARATRIX_ENERGY))
    if np.any(bad):
        raise DomainError('xi', float(xi_arr[bad].flat[0]), '(0, 1/4)')

    return xi_arr


def C_of(gamma: ArrayLike, xi: ArrayLike, ctx: FirstIntegralContext) -> float | np.ndarray:
    """Vectorized first integral; broadcasts gamma against xi."""
    xi_arr = np.asarray(xi, dtype=float)
    values = (-ctx.F * np.asarray(coupling_G(xi_arr, ctx.coupling)) * np.cos(gamma)
              - ctx.Omega * np.asarray(action_of_energy(xi_arr)) + xi_arr)

    return float(values) if np.ndim(gamma) == 0 and np.ndim(xi) == 0 else values


def C_value(s: SlowState, ctx: FirstIntegralContext) -> float:
    """Level of the first integral at a cylinder point."""
    return float(C_of(s.gamma, s.xi, ctx))


def dC_dgamma(gamma: ArrayLike, xi: ArrayLike, ctx: FirstIntegralContext) -> np.ndarray:
    return ctx.F * np.asarray(coupling_G(xi, ctx.coupling)) * np.sin(gamma)


def dC_dxi(gamma: ArrayLike, xi: ArrayLike, ctx: FirstIntegralContext) -> np.ndarray:
    """Uses dJ/dxi = 1/angle_frequency(xi)."""
    xi_arr = _check_interior(xi)

    return (-ctx.F * np.asarray(coupling_G_derivative(xi_arr, ctx.coupling)) * np.cos(gamma)
            - ctx.Omega / np.asarray(angle_frequency(xi_arr)) + 1.0)


def _d2C_dxi2(gamma: float, xi: float, ctx: FirstIntegralContext) -> float:
    h = min(1e-5, xi / 4.0, (SEPARATRIX_ENERGY - xi) / 4.0)

    return float((dC_dxi(gamma, xi + h, ctx) - dC_dxi(gamma, xi - h, ctx)) / (2.0 * h))


def hessian_det(gamma: float, xi: float, ctx: FirstIntegralContext) -> float:
    c_gg = ctx.F * float(coupling_G(xi, ctx.coupling)) * math.cos(gamma)
    c_xx = _d2C_dxi2(gamma, xi, ctx)
    c_gx = ctx.F * float(coupling_G_derivative(xi, ctx.coupling)) * math.sin(gamma)

    return c_gg * c_xx - c_gx * c_gx


def slow_rhs(s: SlowState, ctx: FirstIntegralContext) -> tuple[float, float]:
    """Hamiltonian flow of C in the (gamma, xi) chart.

    In canonical (gamma, J) the flow is J' = -dC/dgamma, gamma' = dC/dJ; the
    chart factor dxi/dJ = angle_frequency(xi) multiplies both equations, so C
    is conserved exactly by the transformed field.

    Raises:
        DomainError: raised outside 0 < xi < 1/4 - 1e-9.
    """

    return slow_rhs_arrays(s.gamma, s.xi, ctx)


def slow_rhs_arrays(gamma: ArrayLike, xi: ArrayLike, ctx: FirstIntegralContext) -> tuple:
    xi_arr = _check_interior(xi)
    if np.any(xi_arr > XI_CEILING):
        raise DomainError('xi', float(np.max(xi_arr)), '(0, 1/4 - 1e-9]: angle frequency vanishes at the separatrix')

    frequency = np.asarray(angle_frequency(xi_arr))
    gamma_dot = frequency * dC_dxi(gamma, xi_arr, ctx)
    xi_dot = -frequency * dC_dgamma(gamma, xi_arr, ctx)
    if np.ndim(gamma) == 0 and np.ndim(xi) == 0:
        return float(gamma_dot), float(xi_dot)

    return gamma_dot, xi_dot


def _critical_points_on_line(gamma: float, ctx: FirstIntegralContext, upper: float = XI_CEILING) -> list[float]:
    """Roots in xi of dC/dxi on the line gamma = const, bracketed on a scan grid then Newton-polished."""
    grid = np.linspace(XI_FLOOR, upper, SCAN_POINTS)
    values = dC_dxi(gamma, grid, ctx)
    roots: list[float] = []

    for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        lo, hi = float(grid[i]), float(grid[i + 1])
        g = lambda x: float(dC_dxi(gamma, x, ctx))
        root = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        try:
            polished = newton(g, root, fprime=lambda x: _d2C_dxi2(gamma, x, ctx),
                              tol=NEWTON_TOL, maxiter=NEWTON_MAX_ITER)
            if lo <= polished <= hi:
                root = float(polished)
        except (RuntimeError, ZeroDivisionError):
            logger.debug('Newton polish failed at gamma=%s near xi=%s; keeping bracketed root', gamma, root)
        roots.append(root)

    return roots


def find_saddles(ctx: FirstIntegralContext) -> list[SaddlePoint]:
    """All saddles of C (det Hessian < 0) on the lines gamma = 0 and gamma = pi, ordered by xi."""
    if ctx.F <= 0.0:
        return []

    saddles: list[SaddlePoint] = []
    for gamma in (0.0, math.pi):
        for xi in _critical_points_on_line(gamma, ctx):
            if hessian_det(gamma, xi, ctx) < 0.0:
                saddles.append(SaddlePoint(gamma, xi, float(C_of(gamma, xi, ctx))))

    return sorted(saddles, key=lambda saddle: saddle.xi_dag)


def find_saddle(ctx: FirstIntegralContext) -> SaddlePoint | None:
    """The lowest-energy saddle of the slow flow, or None when C has no isolated saddle."""
    saddles = find_saddles(ctx)

    return saddles[0] if saddles else None


def fcr_mm(Omega: float, ic: SlowState, xi_max: float, coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> MMThreshold | None:
    """Smallest forcing for which the level curve through ic touches xi = xi_max at gamma* in {0, pi}.

    Both sides of C(gamma*, xi_max) = C(gamma_ini, xi_ini) are linear in F, so
    each branch is solved exactly.

    Returns:
        MMThreshold | None: (F_cr, gamma_star), or None if no branch has a nonnegative solution.
    """

    if not 0.0 < xi_max < SEPARATRIX_ENERGY:
        raise DomainError('xi_max', xi_max, '(0, 1/4)')
    if ic.xi >= xi_max:
        return MMThreshold(0.0, 0.0 if math.cos(ic.gamma) >= 0.0 else math.pi)

    return min(_mm_candidates(Omega, ic, xi_max, coupling), default=None)


def _mm_candidates(Omega: float, ic: SlowState, xi_max: float, coupling: CouplingKind) -> list[MMThreshold]:
    g_max = float(coupling_G(xi_max, coupling))
    g_ini = float(coupling_G(ic.xi, coupling))
    numerator = Omega * (float(action_of_energy(xi_max)) - float(action_of_energy(ic.xi))) - (xi_max - ic.xi)

    candidates: list[MMThreshold] = []
    for gamma_star in (0.0, math.pi):
        denominator = g_ini * math.cos(ic.gamma) - g_max * math.cos(gamma_star)
        if denominator == 0.0:
            continue
        f_cr = numerator / denominator
        if f_cr >= 0.0:
            candidates.append(MMThreshold(f_cr, gamma_star))

    return candidates


def reaches_truncation(F: float, Omega: float, ic: SlowState, xi_max: float,
                       coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> bool:
    """Whether the phase curve through ic reaches the circle xi = xi_max at forcing F.

    The level C0 = C(ic) must meet the circle, where C ranges over
    [C(0, xi_max), C(pi, xi_max)]. A saddle with ic.xi < xi_dag < xi_max whose
    level lies above C0 confines the curve below the saddle energy.
    """

    if ic.xi >= xi_max:
        return True

    ctx = FirstIntegralContext(F, Omega, coupling)
    level = C_value(ic, ctx)
    lowest, highest = sorted((float(C_of(0.0, xi_max, ctx)), float(C_of(math.pi, xi_max, ctx))))
    if not lowest <= level <= highest:
        return False

    return not any(ic.xi < saddle.xi_dag < xi_max and saddle.C_value > level for saddle in find_saddles(ctx))


def sm_point(xi_dag: float, gamma_dag: float, ic: SlowState, coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> SMPoint | None:
    """Solves grad C = 0 at (gamma_dag, xi_dag) together with C(saddle) = C(ic) for (Omega, F).

    Substituting Omega = frequency * (1 - F G' cos(gamma_dag)) into the level
    condition leaves an equation linear in F.
    """

    c = math.cos(gamma_dag)
    frequency = float(angle_frequency(xi_dag))
    g_dag = float(coupling_G(xi_dag, coupling))
    g_prime = float(coupling_G_derivative(xi_dag, coupling))
    g_ini = float(coupling_G(ic.xi, coupling))
    delta_j = float(action_of_energy(xi_dag)) - float(action_of_energy(ic.xi))
    delta_xi = xi_dag - ic.xi

    denominator = -c * g_dag + c * frequency * g_prime * delta_j + g_ini * math.cos(ic.gamma)
    if denominator == 0.0:
        return None

    f_cr = (frequency * delta_j - delta_xi) / denominator
    omega = frequency * (1.0 - f_cr * g_prime * c)
    if not (f_cr > 0.0 and omega > 0.0):
        return None

    ctx = FirstIntegralContext(f_cr, omega, coupling)
    if hessian_det(gamma_dag, xi_dag, ctx) >= 0.0:
        return None

    return SMPoint(xi_dag, gamma_dag, omega, f_cr)


def sm_residuals(point: SMPoint, ic: SlowState, coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> tuple[float, float, float]:
    """(dC/dgamma, dC/dxi, C(saddle) - C(ic)) at a saddle-mechanism point."""
    ctx = FirstIntegralContext(point.F_cr, point.Omega, coupling)

    return (float(dC_dgamma(point.gamma_dag, point.xi_dag, ctx)),
            float(dC_dxi(point.gamma_dag, point.xi_dag, ctx)),
            float(C_of(point.gamma_dag, point.xi_dag, ctx)) - C_value(ic, ctx))


def fcr_sm_curve(xi_dag_range: ArrayLike, ic: SlowState, xi_max: float, coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> list[SMPoint]:
    """Saddle-mechanism threshold curve (Omega(xi_dag), F(xi_dag)) parameterized by the saddle energy.

    Points whose solve fails, or which are not saddles, are skipped with a diagnostic.
    """

    upper = min(xi_max, XI_CEILING)
    points: list[SMPoint] = []

    for xi_dag in np.asarray(xi_dag_range, dtype=float):
        if not 0.0 < xi_dag < upper:
            logger.warning('Skipping xi_dag=%s outside (0, %s)', xi_dag, upper)
            continue

        solved = [point for gamma in (0.0, math.pi)
                  if (point := sm_point(float(xi_dag), gamma, ic, coupling)) is not None]
        if not solved:
            logger.debug('No saddle-mechanism solution at xi_dag=%s', xi_dag)
            continue

        best = min(solved, key=lambda point: point.F_cr)
        residual = max(abs(value) for value in sm_residuals(best, ic, coupling))
        if residual > RESIDUAL_TOL:
            logger.warning('Skipping xi_dag=%s: residual %.3e above %.1e', xi_dag, residual, RESIDUAL_TOL)
            continue
        points.append(best)

    return points


def default_xi_dag_grid(xi_max: float, size: int = 400) -> np.ndarray:
    upper = min(xi_max, XI_CEILING)

    return np.linspace(upper / size, upper * (1.0 - 1.0 / size), size)


def _sm_candidates(Omega: float, ic: SlowState, curve: list[SMPoint], coupling: CouplingKind) -> list[SMPoint]:
    """Saddle-mechanism points at a given frequency, one per crossing of the sampled curve.

    Each crossing is re-solved for xi_dag with brentq; linear interpolation
    between the samples is kept only when that solve fails.
    """

    points: list[SMPoint] = []
    for left, right in zip(curve, curve[1:]):
        lo, hi = sorted((left.Omega, right.Omega))
        if not lo <= Omega <= hi or left.gamma_dag != right.gamma_dag:
            continue

        def offset(xi_dag: float) -> float:
            point = sm_point(xi_dag, left.gamma_dag, ic, coupling)
            return math.nan if point is None else point.Omega - Omega

        try:
            point = sm_point(brentq(offset, left.xi_dag, right.xi_dag, xtol=1e-14), left.gamma_dag, ic, coupling)
        except ValueError:
            point = None
        if point is None or abs(point.Omega - Omega) > 1e-9:
            weight = 0.0 if hi == lo else (Omega - left.Omega) / (right.Omega - left.Omega)
            point = SMPoint(left.xi_dag + weight * (right.xi_dag - left.xi_dag), left.gamma_dag, Omega,
                            left.F_cr + weight * (right.F_cr - left.F_cr))
        points.append(point)

    return points


def _classify(Omega: float, ic: SlowState, xi_max: float, coupling: CouplingKind,
              curve: list[SMPoint]) -> EnvelopePoint | None:
    """Smallest candidate threshold past which the phase curve through ic reaches xi_max."""
    if ic.xi >= xi_max:
        return EnvelopePoint(Omega, 0.0, MechanismKind.MM)

    candidates = [EnvelopePoint(Omega, mm.F_cr, MechanismKind.SMM if mm.gamma_star == 0.0 else MechanismKind.MM)
                  for mm in _mm_candidates(Omega, ic, xi_max, coupling)]
    candidates += [EnvelopePoint(Omega, sm.F_cr, MechanismKind.SM) for sm in _sm_candidates(Omega, ic, curve, coupling)]

    for point in sorted(candidates, key=lambda point: point.F_cr):
        probe = point.F_cr * (1.0 + REACH_SLACK) + REACH_SLACK
        if reaches_truncation(probe, Omega, ic, xi_max, coupling):
            return point

    return None


def classify_mechanism(Omega: float, ic: SlowState, xi_max: float, F: float | None = None,
                       coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> MechanismKind:
    """Escape mechanism governing the threshold at (Omega, ic, xi_max).

    SM when the saddle level is reached before any tangency; SMM when the
    threshold is the gamma* = 0 tangency with the saddle above xi_max; MM
    otherwise. With F = 0 nothing escapes and only the MM context is returned.
    """

    if F is not None and F <= 0.0:
        return MechanismKind.MM

    point = _classify(Omega, ic, xi_max, coupling, fcr_sm_curve(default_xi_dag_grid(xi_max), ic, xi_max, coupling))

    return MechanismKind.MM if point is None else point.mechanism


def fcr_envelope(Omega_grid: ArrayLike, ic: SlowState, xi_max: float,
                 coupling: CouplingKind = CouplingKind.CLOSED_FORM, pool=None) -> list[EnvelopePoint]:
    """Analytic threshold F_cr(Omega): pointwise minimum over the available mechanisms.

    Frequencies without any positive threshold are skipped with a warning. The
    output is ordered like Omega_grid whatever the pool size.
    """

    curve = fcr_sm_curve(default_xi_dag_grid(xi_max), ic, xi_max, coupling)
    omegas = [float(omega) for omega in np.asarray(Omega_grid, dtype=float)]
    task = lambda omega: _classify(omega, ic, xi_max, coupling, curve)
    results = pool.map(task, omegas) if pool is not None else [task(omega) for omega in omegas]

    envelope: list[EnvelopePoint] = []
    for omega, point in zip(omegas, results):
        if point is None:
            logger.warning('No escape threshold found at Omega=%s', omega)
            continue
        envelope.append(point)

    return envelope
