"""Brute-force verification harness: escape detection by direct integration of the full model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike

from dynamics.DynamicsExceptions import DomainError
from dynamics.Model import (CriterionKind, EscapeCriterion, Extent,
                            ModelParams, PhasePoint, in_well, plane_axes)
from simulation.Integrator import StepSettings
from simulation.Runtime import Runtime
from simulation.SimulationExceptions import BracketError
from simulation.WorkerPool import WorkerPool, chunk_slices, inline_pool

logger = logging.getLogger(__name__)

DEFAULT_HORIZON_EC = 3000.0
FAST_HORIZON_EC = 500.0
FCR_TOLERANCE = 5e-5
DEFAULT_FCR_BRACKET = (0.0, 0.2)


@dataclass(frozen=True)
class BasinGrid:
    """Raster classification of initial conditions by direct integration.

    Attributes:
        extent (Extent): rectangle of the (q0, p0) plane.
        resolution (tuple[int, int]): (nx, ny).
        criterion (EscapeCriterion): escape definition used.
        horizon_ec (float): evaluation time in excitation cycles.
        escape_time_ec (np.ndarray): [iy, ix] first escape time in EC, NaN for safe cells.
    """

    extent: Extent
    resolution: tuple[int, int]
    criterion: EscapeCriterion
    horizon_ec: float
    escape_time_ec: np.ndarray

    @property
    def escaped(self) -> np.ndarray:
        return ~np.isnan(self.escape_time_ec)

    @property
    def safe(self) -> np.ndarray:
        return np.isnan(self.escape_time_ec)

    def safe_at(self, t_eval_ec: float) -> np.ndarray:
        """Safe set had the scan stopped at t_eval_ec; shrinks as t_eval_ec grows."""
        return np.isnan(self.escape_time_ec) | (self.escape_time_ec > t_eval_ec)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return plane_axes(self.extent, self.resolution)

    def rows(self) -> Iterator[tuple[float, float, bool, float | None]]:
        """(q0, p0, escaped, escape_time_ec) per cell, rows of constant p0 in increasing order."""
        q, p = self.axes()
        for q0, p0, time in zip(q.ravel(), p.ravel(), self.escape_time_ec.ravel()):
            escaped = not math.isnan(time)
            yield float(q0), float(p0), escaped, float(time) if escaped else None


@dataclass(frozen=True)
class StrobeOrbit:
    """Stroboscopic samples of one trajectory at tau = T, 2T, ..., excluding the initial condition.

    Attributes:
        ic (PhasePoint): initial condition.
        samples (np.ndarray): (n, 2) array of (q, p); truncated at escape.
        escaped (bool): whether the trajectory escaped before the last iteration.
    """

    ic: PhasePoint
    samples: np.ndarray
    escaped: bool


class NumericThreshold(NamedTuple):
    Omega: float
    F_cr: float


class CriteriaRow(NamedTuple):
    F: float
    repeat: int
    A_q: int
    A_E: int
    rel_diff: float
    violations: int = 0


class CriteriaSummary(NamedTuple):
    F: float
    min: float
    mean: float
    max: float


class AreaPoint(NamedTuple):
    t_eval_ec: float
    safe_pixels: int


def _check_horizon(horizon_ec: float) -> None:
    if not horizon_ec > 0.0:
        raise DomainError('horizon_ec', horizon_ec, '(0, inf)')


def escape_times_ec(q0: ArrayLike, p0: ArrayLike, F: ArrayLike, Omega: ArrayLike, Psi: ArrayLike,
                    criterion: EscapeCriterion, horizon_ec: float, pool: WorkerPool | None = None,
                    settings: StepSettings | None = None) -> np.ndarray:
    """Escape time in EC of every initial condition, NaN when it stays within the horizon.

    Work is split into fixed-size chunks, so the result does not depend on the number of workers.
    """

    _check_horizon(horizon_ec)
    arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(value, dtype=float)) for value in (q0, p0, F, Omega, Psi)))
    q_b, p_b, F_b, Omega_b, Psi_b = (array.ravel() for array in arrays)

    def run(chunk: slice) -> np.ndarray:
        runtime = Runtime(q_b[chunk], p_b[chunk], F_b[chunk], Omega_b[chunk], Psi_b[chunk], criterion, settings)
        runtime.advance_to(horizon_ec * 2.0 * math.pi / Omega_b[chunk])
        return runtime.escape_time_ec()

    parts = inline_pool(pool).map(run, chunk_slices(q_b.size))

    return np.concatenate(parts) if parts else np.empty(0)


def integrate(ic: PhasePoint, params: ModelParams, horizon_EC: float, criterion: EscapeCriterion,
              settings: StepSettings | None = None) -> float | None:
    """First escape time of one trajectory in EC, or None within the horizon.

    Raises:
        DomainError: raised for a non-positive horizon.
        IntegratorStepError: raised when the step size underflows.
    """

    times = escape_times_ec(ic.q, ic.p, params.F, params.Omega, params.Psi, criterion, horizon_EC, settings=settings)

    return None if math.isnan(times[0]) else float(times[0])


def _bisect_many(Omegas: np.ndarray, ic: PhasePoint, params_base: ModelParams, criterion: EscapeCriterion,
                 bracket: tuple[float, float], horizon_ec: float, tolerance: float,
                 pool: WorkerPool | None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bisects F at every frequency at once.

    Returns:
        tuple: (F_cr, escaped_lo, escaped_hi); F_cr is NaN where the bracket is invalid.
    """

    F_lo, F_hi = bracket
    n = Omegas.size
    ends = np.concatenate([np.full(n, F_lo), np.full(n, F_hi)])
    escaped = ~np.isnan(escape_times_ec(ic.q, ic.p, ends, np.tile(Omegas, 2), params_base.Psi,
                                        criterion, horizon_ec, pool))
    escaped_lo, escaped_hi = escaped[:n], escaped[n:]
    valid = ~escaped_lo & escaped_hi

    lo = np.full(n, F_lo)
    hi = np.full(n, F_hi)
    while np.any(valid) and hi[valid][0] - lo[valid][0] > tolerance:
        mid = 0.5 * (lo[valid] + hi[valid])
        escapes = ~np.isnan(escape_times_ec(ic.q, ic.p, mid, Omegas[valid], params_base.Psi,
                                            criterion, horizon_ec, pool))
        hi[valid] = np.where(escapes, mid, hi[valid])
        lo[valid] = np.where(escapes, lo[valid], mid)

    return np.where(valid, 0.5 * (lo + hi), np.nan), escaped_lo, escaped_hi


def bisect_fcr(Omega: float, ic: PhasePoint, params_base: ModelParams, criterion: EscapeCriterion,
               bracket: tuple[float, float] = DEFAULT_FCR_BRACKET, horizon_ec: float = DEFAULT_HORIZON_EC,
               tolerance: float = FCR_TOLERANCE, pool: WorkerPool | None = None) -> float:
    """Critical forcing at one frequency, to within tolerance.

    Raises:
        BracketError: raised unless the trajectory escapes at the upper end of the bracket and not at the lower.
    """

    values, escaped_lo, escaped_hi = _bisect_many(np.array([float(Omega)]), ic, params_base, criterion,
                                                  bracket, horizon_ec, tolerance, pool)
    if math.isnan(values[0]):
        raise BracketError(bracket[0], bracket[1], bool(escaped_lo[0]), bool(escaped_hi[0]))

    return float(values[0])


def fcr_curve_numeric(Omega_grid: ArrayLike, ic: PhasePoint, params_base: ModelParams, criterion: EscapeCriterion,
                      bracket: tuple[float, float] = DEFAULT_FCR_BRACKET, horizon_ec: float = DEFAULT_HORIZON_EC,
                      tolerance: float = FCR_TOLERANCE, pool: WorkerPool | None = None) -> list[NumericThreshold]:
    """Numeric threshold curve; frequencies whose bracket is invalid are skipped with a warning."""
    Omegas = np.asarray(Omega_grid, dtype=float).ravel()
    values, escaped_lo, escaped_hi = _bisect_many(Omegas, ic, params_base, criterion, bracket, horizon_ec, tolerance, pool)

    curve: list[NumericThreshold] = []
    for i, omega in enumerate(Omegas):
        if math.isnan(values[i]):
            logger.warning('%s', BracketError(bracket[0], bracket[1], bool(escaped_lo[i]), bool(escaped_hi[i])))
            continue
        curve.append(NumericThreshold(float(omega), float(values[i])))

    return curve


def grid_scan(extent: Extent, resolution: tuple[int, int], params: ModelParams, criterion: EscapeCriterion,
              horizon_ec: float = DEFAULT_HORIZON_EC, pool: WorkerPool | None = None) -> BasinGrid:
    q, p = plane_axes(extent, resolution)
    logger.info('Scanning %dx%d initial conditions at %s for %s EC', resolution[0], resolution[1],
                params.to_dict(), horizon_ec)
    times = escape_times_ec(q, p, params.F, params.Omega, params.Psi, criterion, horizon_ec, pool)

    return BasinGrid(extent, (int(resolution[0]), int(resolution[1])), criterion, float(horizon_ec),
                     times.reshape(q.shape))


def strobe_map(ics: Sequence[PhasePoint], params: ModelParams, n_iters: int, criterion: EscapeCriterion | None = None,
               pool: WorkerPool | None = None, settings: StepSettings | None = None) -> list[StrobeOrbit]:
    """Period map (q(t), p(t)) -> (q(t + T), p(t + T)) iterated n_iters times from each initial condition."""
    if n_iters < 1:
        raise DomainError('n_iters', n_iters, '[1, inf)')

    criterion = criterion or EscapeCriterion.displacement(params.xi_max)
    q0 = np.array([ic.q for ic in ics], dtype=float)
    p0 = np.array([ic.p for ic in ics], dtype=float)
    period = params.period

    def run(chunk: slice) -> tuple[np.ndarray, np.ndarray]:
        runtime = Runtime(q0[chunk], p0[chunk], params.F, params.Omega, params.Psi, criterion, settings)
        samples = np.full((runtime.size, n_iters, 2), np.nan)
        counts = np.zeros(runtime.size, dtype=int)
        for k in range(n_iters):
            runtime.advance_to((k + 1) * period)
            alive = ~runtime.escaped
            samples[alive, k, 0] = runtime.q[alive]
            samples[alive, k, 1] = runtime.p[alive]
            counts[alive] = k + 1
        return samples, counts

    results = inline_pool(pool).map(run, chunk_slices(q0.size))
    orbits: list[StrobeOrbit] = []
    for chunk, (samples, counts) in zip(chunk_slices(q0.size), results):
        for offset, i in enumerate(range(chunk.start, chunk.stop)):
            count = int(counts[offset])
            orbits.append(StrobeOrbit(ics[i], samples[offset, :count].copy(), count < n_iters))

    return orbits


def criteria_compare(params_base: ModelParams, F_list: Sequence[float], n_ics: int, n_repeats: int, seed: int,
                     extent: Extent = Extent.square(), horizon_ec: float = DEFAULT_HORIZON_EC,
                     pool: WorkerPool | None = None, verify_containment: bool = False) -> list[CriteriaRow]:
    """Displacement- versus energy-criterion safe counts on seeded random initial conditions.

    Each repeat draws n_ics uniform points in extent, keeps those safe under the
    energy criterion (A_E), then integrates the rest under the displacement
    criterion; A_q adds the survivors of that second pass. With
    verify_containment the energy-safe points are also checked under the
    displacement criterion and any escape is counted as a violation.
    """

    energy = EscapeCriterion.energy(params_base.xi_max)
    displacement = EscapeCriterion.displacement(params_base.xi_max)
    seeds = np.random.SeedSequence(seed).spawn(len(F_list) * n_repeats)
    rows: list[CriteriaRow] = []

    for i, F in enumerate(F_list):
        for repeat in range(n_repeats):
            rng = np.random.default_rng(seeds[i * n_repeats + repeat])
            q0 = rng.uniform(extent.q_min, extent.q_max, n_ics)
            p0 = rng.uniform(extent.p_min, extent.p_max, n_ics)

            energy_safe = np.isnan(escape_times_ec(q0, p0, F, params_base.Omega, params_base.Psi,
                                                   energy, horizon_ec, pool))
            rest = ~energy_safe
            displacement_only = np.isnan(escape_times_ec(q0[rest], p0[rest], F, params_base.Omega, params_base.Psi,
                                                         displacement, horizon_ec, pool))
            a_e = int(np.count_nonzero(energy_safe))
            a_q = a_e + int(np.count_nonzero(displacement_only))

            violations = 0
            if verify_containment and a_e:
                escaped = ~np.isnan(escape_times_ec(q0[energy_safe], p0[energy_safe], F, params_base.Omega,
                                                    params_base.Psi, displacement, horizon_ec, pool))
                violations = int(np.count_nonzero(escaped))
                if violations:
                    logger.error('%d energy-safe points escape by displacement at F=%s, repeat %d', violations, F, repeat)

            rel_diff = (a_q - a_e) / a_e if a_e else math.nan
            rows.append(CriteriaRow(float(F), repeat, a_q, a_e, rel_diff, violations))
            logger.info('F=%s repeat %d: A_q=%d A_E=%d', F, repeat, a_q, a_e)

    return rows


def criteria_summary(rows: Sequence[CriteriaRow]) -> list[CriteriaSummary]:
    """Minimum, mean and maximum of rel_diff over repeats, per F in first-seen order."""
    groups: dict[float, list[float]] = {}
    for row in rows:
        groups.setdefault(row.F, []).append(row.rel_diff)

    summary: list[CriteriaSummary] = []
    for F, values in groups.items():
        finite = np.array([value for value in values if not math.isnan(value)])
        if finite.size == 0:
            summary.append(CriteriaSummary(F, math.nan, math.nan, math.nan))
        else:
            summary.append(CriteriaSummary(F, float(finite.min()), float(finite.mean()), float(finite.max())))

    return summary


def area_vs_time(extent: Extent, resolution: tuple[int, int], params: ModelParams, criterion: EscapeCriterion,
                 checkpoints_EC: Sequence[float], pool: WorkerPool | None = None) -> list[AreaPoint]:
    """Safe-pixel count at each evaluation time, from a single scan up to the last checkpoint."""
    checkpoints = np.asarray(checkpoints_EC, dtype=float)
    if checkpoints.size == 0 or checkpoints[0] <= 0.0 or np.any(np.diff(checkpoints) <= 0.0):
        raise DomainError('checkpoints_ec', list(checkpoints), 'positive and strictly increasing')

    grid = grid_scan(extent, resolution, params, criterion, float(checkpoints[-1]), pool)

    return [AreaPoint(float(t), int(np.count_nonzero(grid.safe_at(t)))) for t in checkpoints]


def mismatch_fraction(predicted: np.ndarray, grid: BasinGrid, xi_max: float) -> float:
    """Share of in-well cells where a predicted safe raster and a numeric grid disagree."""
    q, p = grid.axes()
    mask = in_well(q, p, xi_max)
    if not np.any(mask):
        return 0.0

    return float(np.count_nonzero(predicted[mask] != grid.safe[mask]) / np.count_nonzero(mask))


def nested_basins(extent: Extent, resolution: tuple[int, int], params_list: Sequence[ModelParams],
                  kind: CriterionKind, horizon_ec: float = DEFAULT_HORIZON_EC,
                  pool: WorkerPool | None = None) -> np.ndarray:
    """Per cell, the number of parameter sets under which it is safe."""
    depth = np.zeros((resolution[1], resolution[0]), dtype=int)
    for params in params_list:
        grid = grid_scan(extent, resolution, params, EscapeCriterion.of(kind, params.xi_max), horizon_ec, pool)
        depth += grid.safe

    return depth


def dual_criteria_scan(extent: Extent, resolution: tuple[int, int], params: ModelParams,
                       horizon_ec: float = DEFAULT_HORIZON_EC, pool: WorkerPool | None = None) -> tuple[BasinGrid, BasinGrid]:
    """(displacement grid, energy grid) over the same raster."""
    return (grid_scan(extent, resolution, params, EscapeCriterion.displacement(params.xi_max), horizon_ec, pool),
            grid_scan(extent, resolution, params, EscapeCriterion.energy(params.xi_max), horizon_ec, pool))
