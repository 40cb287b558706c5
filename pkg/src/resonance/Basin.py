"""Analytic safe basins: level curves of the slow-flow first integral traced on
the (gamma, xi) cylinder, classified, and mapped to the initial-condition plane.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np
from numpy.typing import ArrayLike
from scipy import ndimage

from dynamics.ActionAngle import (CouplingKind, SlowState, coupling_G, p_of_angle,
                                  q_of_angle, slow_coords_arrays)
from dynamics.DynamicsExceptions import DomainError
from dynamics.Model import (SEPARATRIX_ENERGY, Extent, ModelParams, in_well,
                            plane_axes)
from resonance.SlowFlow import (XI_CEILING, FirstIntegralContext, C_of, dC_dxi,
                                find_saddle)

logger = logging.getLogger(__name__)

GAMMA_POINTS = 1024
XI_POINTS = 400
BISECTION_STEPS = 60
LPT_TOLERANCE = 1e-12
MEMBERSHIP_SLACK = 1e-12
RASTER_RESOLUTION = (400, 400)

TWO_PI = 2.0 * math.pi


class BasinType(Enum):
    SBMT_ISLAND = 'SBMT_island'
    SBMT_PENINSULA = 'SBMT_peninsula'
    SBST = 'SBST'

    @property
    def wraps(self) -> bool:
        return self is not BasinType.SBMT_ISLAND


@dataclass(frozen=True)
class BasinBoundary:
    """Classified boundary of one safe set.

    Attributes:
        basin_type (BasinType): island, peninsula or saddle type.
        level (float): value of C along the curve.
        cylinder_polyline (np.ndarray): ordered (gamma, xi) samples, shape (n, 2); islands are closed loops.
        gamma_span (np.ndarray): increasing, unwrapped gamma samples of the safe set.
        xi_upper (np.ndarray): upper edge of the safe set over gamma_span.
        xi_lower (np.ndarray | None): lower edge for islands, None when the set reaches xi = 0.
        anchor (tuple[float, float]): tangency point (gamma*, xi_max) or saddle (gamma_dag, xi_dag).
        plane_polylines (tuple[np.ndarray, ...]): closed counterclockwise (q0, p0) loops, filled by analytic_basin.
        is_lpt (bool): island bounded by the limiting phase trajectory C = 0.
    """

    basin_type: BasinType
    level: float
    cylinder_polyline: np.ndarray
    gamma_span: np.ndarray
    xi_upper: np.ndarray
    xi_lower: np.ndarray | None
    anchor: tuple[float, float]
    plane_polylines: tuple[np.ndarray, ...] = ()
    is_lpt: bool = False

    def contains(self, gamma: ArrayLike, xi: ArrayLike) -> np.ndarray:
        """Closed-set membership of cylinder points (boundary included)."""
        g = np.mod(np.asarray(gamma, dtype=float), TWO_PI)
        xi_arr = np.asarray(xi, dtype=float)

        if self.basin_type.wraps:
            edge = np.interp(g, self.gamma_span, self.xi_upper, period=TWO_PI)
            return xi_arr <= edge + MEMBERSHIP_SLACK

        start = self.gamma_span[0]
        unwrapped = start + np.mod(g - start, TWO_PI)
        inside = unwrapped <= self.gamma_span[-1] + MEMBERSHIP_SLACK
        upper = np.interp(unwrapped, self.gamma_span, self.xi_upper)
        lower = 0.0 if self.xi_lower is None else np.interp(unwrapped, self.gamma_span, self.xi_lower)

        return inside & (xi_arr <= upper + MEMBERSHIP_SLACK) & (xi_arr >= lower - MEMBERSHIP_SLACK)

    @property
    def gamma_extent(self) -> float:
        return float(self.gamma_span[-1] - self.gamma_span[0])


@dataclass(frozen=True)
class SafeRegion:
    """Union of the safe sets delimited by the boundaries found for one parameter set.

    Attributes:
        params (ModelParams): parameters the region was built for.
        boundaries (tuple[BasinBoundary, ...]): all boundaries, possibly none.
        coexisting (bool): more than one boundary type is present.
        disjoint (bool): the plane regions of the boundaries share no raster cell and form separate components.
    """

    params: ModelParams
    boundaries: tuple[BasinBoundary, ...] = ()
    coexisting: bool = False
    disjoint: bool = False

    @property
    def is_empty(self) -> bool:
        return not self.boundaries

    def contains(self, gamma: ArrayLike, xi: ArrayLike) -> np.ndarray:
        xi_arr = np.asarray(xi, dtype=float)
        result = np.zeros(np.broadcast(np.asarray(gamma), xi_arr).shape, dtype=bool)
        for boundary in self.boundaries:
            result |= boundary.contains(gamma, xi_arr)

        return result & (xi_arr <= self.params.xi_max)

    def to_dict(self) -> dict:
        return {
            'params': self.params.to_dict(),
            'boundaries': [b.basin_type.value for b in self.boundaries],
            'coexisting': self.coexisting,
            'disjoint': self.disjoint,
        }


@dataclass
class LevelGrid:
    """C tabulated on GAMMA_POINTS uniform phases times XI_POINTS + 1 energies clustered toward both 0 and xi_cap.

    Attributes:
        ctx (FirstIntegralContext): forcing the table was built for.
        xi_cap (float): top energy of the table.
        gammas (np.ndarray): phases 2*pi*i/GAMMA_POINTS; 0 and pi are exact nodes.
        xis (np.ndarray): energies xi_cap*(1 - cos(pi*j/XI_POINTS))/2; 0 and xi_cap are exact nodes.
        table (np.ndarray): C(gammas[i], xis[j]).
    """

    ctx: FirstIntegralContext
    xi_cap: float
    gammas: np.ndarray = field(init=False)
    xis: np.ndarray = field(init=False)
    table: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.gammas = TWO_PI * np.arange(GAMMA_POINTS) / GAMMA_POINTS
        self.xis = 0.5 * self.xi_cap * (1.0 - np.cos(np.pi * np.arange(XI_POINTS + 1) / XI_POINTS))
        self.table = np.asarray(C_of(self.gammas[:, np.newaxis], self.xis[np.newaxis, :], self.ctx))

    def column_of(self, gamma: float) -> int:
        return int(round(gamma / TWO_PI * GAMMA_POINTS)) % GAMMA_POINTS

    def level_roots(self, level: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Crossings of C = level in every column, ascending in xi, with the sign of dC/dxi at each."""
        sign = np.sign(self.table - level)
        cols, rows = np.nonzero(sign[:, :-1] * sign[:, 1:] < 0)

        lo = self.xis[rows].copy()
        hi = self.xis[rows + 1].copy()
        sign_lo = sign[cols, rows]
        gammas = self.gammas[cols]
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            stays = np.sign(np.asarray(C_of(gammas, mid, self.ctx)) - level) == sign_lo
            lo = np.where(stays, mid, lo)
            hi = np.where(stays, hi, mid)

        splits = np.searchsorted(cols, np.arange(1, GAMMA_POINTS))

        return np.split(0.5 * (lo + hi), splits), np.split(-sign_lo, splits)


def _between(crossings: np.ndarray, a: float, b: float) -> bool:
    lo, hi = min(a, b), max(a, b)

    return bool(np.any((crossings > lo) & (crossings < hi)))


def _follow(roots: list[np.ndarray], directions: list[np.ndarray], start: int, xi_start: float,
            direction: float, step: int) -> tuple[list[tuple[int, float]], int | None]:
    """Walks column by column along crossings of one direction, keeping the one nearest the previous sample.

    A step is taken only when neither column holds another crossing between the two samples. Where the
    level curve folds back in gamma that test fails, and the walk ends there as it would at a column
    without crossings.

    Returns:
        tuple: visited (column, xi) pairs and the first column without a crossing, or None after a full turn.
    """

    path: list[tuple[int, float]] = []
    col, xi = start, xi_start

    for _ in range(GAMMA_POINTS - 1):
        nxt = (col + step) % GAMMA_POINTS
        candidates = roots[nxt][directions[nxt] == direction]
        if candidates.size == 0:
            return path, nxt

        nearest = float(candidates[np.argmin(np.abs(candidates - xi))])
        if _between(roots[col], xi, nearest) or _between(roots[nxt], xi, nearest):
            logger.debug('Level curve folds back between gamma columns %s and %s', col, nxt)
            return path, nxt

        xi = nearest
        col = nxt
        path.append((col, xi))

    return path, None


def _wrapping_boundary(basin_type: BasinType, grid: LevelGrid, start: int, xi_upper: np.ndarray,
                       level: float, anchor: tuple[float, float]) -> BasinBoundary:
    order = (start + np.arange(GAMMA_POINTS)) % GAMMA_POINTS
    gammas = grid.gammas[order]
    upper = xi_upper[order]

    return BasinBoundary(basin_type, level, np.column_stack([gammas, upper]),
                         grid.gammas.copy(), xi_upper.copy(), None, anchor)


def _trace_tangency(grid: LevelGrid, gamma_star: float, xi_max: float) -> BasinBoundary | None:
    ctx = grid.ctx
    slope = float(dC_dxi(gamma_star, xi_max, ctx))
    curvature = ctx.F * float(coupling_G(xi_max, ctx.coupling)) * math.cos(gamma_star)
    # The level curve bends below xi_max only where C(., xi_max) has a local maximum relative to slope.
    if slope == 0.0 or curvature / slope <= 0.0:
        logger.debug('No sub-threshold tangency at gamma*=%s', gamma_star)
        return None

    level = float(C_of(gamma_star, xi_max, ctx))
    direction = math.copysign(1.0, slope)
    roots, directions = grid.level_roots(level)
    start = grid.column_of(gamma_star)
    anchor = (gamma_star, xi_max)

    forward, forward_end = _follow(roots, directions, start, xi_max, direction, +1)
    if forward_end is None:
        upper = np.empty(GAMMA_POINTS)
        upper[start] = xi_max
        for col, xi in forward:
            upper[col] = xi
        return _wrapping_boundary(BasinType.SBMT_PENINSULA, grid, start, upper, level, anchor)

    backward, backward_end = _follow(roots, directions, start, xi_max, direction, -1)
    if backward_end is None:
        return None

    for end in (forward_end, backward_end):
        if np.sign(grid.table[end, -1] - level) != direction:
            logger.debug('Level curve through gamma*=%s leaves the well near gamma=%s', gamma_star, grid.gammas[end])
            return None

    samples = backward[::-1] + [(start, xi_max)] + forward
    cols = np.array([col for col, _ in samples])
    upper = np.array([xi for _, xi in samples])
    lower = np.zeros_like(upper)
    for i, (col, xi) in enumerate(samples):
        below = roots[col][(directions[col] == -direction) & (roots[col] < xi)]
        if below.size:
            lower[i] = below.max()

    gamma_span = grid.gammas[start] + TWO_PI / GAMMA_POINTS * (np.arange(cols.size) - len(backward))
    gammas = grid.gammas[cols]
    polyline = np.concatenate([np.column_stack([gammas, upper]),
                               np.column_stack([gammas, lower])[::-1],
                               [[gammas[0], upper[0]]]])
    is_lpt = abs(level) <= LPT_TOLERANCE

    return BasinBoundary(BasinType.SBMT_ISLAND, level, polyline, gamma_span, upper,
                         None if is_lpt and not np.any(lower) else lower, anchor, is_lpt=is_lpt)


def _check_tangency_level(xi_max: float) -> None:
    if not 0.0 < xi_max < SEPARATRIX_ENERGY:
        raise DomainError('xi_max', xi_max, '(0, 1/4): the tangent point is undefined on the separatrix')


def trace_sbmt_all(ctx: FirstIntegralContext, xi_max: float) -> list[BasinBoundary]:
    """Every maximum-type boundary, one per admissible tangency gamma* in {0, pi}.

    Raises:
        DomainError: raised for xi_max = 1/4.
    """

    _check_tangency_level(xi_max)
    if ctx.F <= 0.0:
        return []

    grid = LevelGrid(ctx, xi_max)

    return [boundary for gamma_star in (0.0, math.pi)
            if (boundary := _trace_tangency(grid, gamma_star, xi_max)) is not None]


def trace_sbmt(ctx: FirstIntegralContext, xi_max: float) -> BasinBoundary | None:
    """Level curve through the tangency (gamma*, xi_max) that stays below xi_max, classified island or peninsula."""
    boundaries = trace_sbmt_all(ctx, xi_max)

    return boundaries[0] if boundaries else None


def trace_sbst(ctx: FirstIntegralContext, xi_max: float) -> BasinBoundary | None:
    """Lowest level curve through the slow-flow saddle; None without a saddle below xi_max."""
    saddle = find_saddle(ctx)
    if saddle is None or saddle.xi_dag >= xi_max:
        return None

    grid = LevelGrid(ctx, min(xi_max, XI_CEILING))
    roots, _ = grid.level_roots(saddle.C_value)
    start = grid.column_of(saddle.gamma_dag)

    upper = np.empty(GAMMA_POINTS)
    for col, crossings in enumerate(roots):
        if col == start:
            upper[col] = saddle.xi_dag if crossings.size == 0 else min(saddle.xi_dag, crossings[0])
        elif crossings.size == 0:
            logger.debug('Saddle level %s has no crossing below xi_max at gamma=%s', saddle.C_value, grid.gammas[col])
            return None
        else:
            upper[col] = crossings[0]

    return _wrapping_boundary(BasinType.SBST, grid, start, upper, saddle.C_value, (saddle.gamma_dag, saddle.xi_dag))


def _unforced_boundary(xi_max: float, ctx: FirstIntegralContext) -> BasinBoundary:
    xi_cap = min(xi_max, XI_CEILING)
    gammas = TWO_PI * np.arange(GAMMA_POINTS) / GAMMA_POINTS
    upper = np.full(GAMMA_POINTS, xi_cap)

    return BasinBoundary(BasinType.SBMT_PENINSULA, float(C_of(0.0, xi_cap, ctx)),
                         np.column_stack([gammas, upper]), gammas, upper, None, (0.0, xi_cap))


def safe_membership(s: SlowState, region: SafeRegion) -> bool:
    return bool(region.contains(s.gamma, s.xi))


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]

    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def map_to_ic_plane(b: BasinBoundary, Psi: float) -> tuple[np.ndarray, ...]:
    """Closed counterclockwise (q0, p0) loops of a boundary at tau = 0, via theta = gamma + Psi."""
    gamma, xi = b.cylinder_polyline[:, 0], b.cylinder_polyline[:, 1]
    xi_eval = np.minimum(xi, XI_CEILING)
    theta = gamma + Psi
    loop = np.column_stack([q_of_angle(theta, xi_eval), p_of_angle(theta, xi_eval)])

    if not np.array_equal(loop[0], loop[-1]):
        loop = np.vstack([loop, loop[:1]])
    if _signed_area(loop) < 0.0:
        loop = loop[::-1].copy()

    return (loop,)


def rasterize(region: SafeRegion, extent: Extent, resolution: tuple[int, int] = RASTER_RESOLUTION,
              boundaries: tuple[BasinBoundary, ...] | None = None) -> np.ndarray:
    """Boolean raster [iy, ix] of initial conditions predicted safe; out-of-well cells are never safe."""
    q, p = plane_axes(extent, resolution)
    params = region.params
    mask = in_well(q, p, params.xi_max)
    safe = np.zeros(q.shape, dtype=bool)
    if not np.any(mask):
        return safe

    gamma, xi = slow_coords_arrays(q[mask], p[mask], params.Psi)
    members = np.zeros(gamma.shape, dtype=bool)
    for boundary in region.boundaries if boundaries is None else boundaries:
        members |= boundary.contains(gamma, xi)
    safe[mask] = members

    return safe


def count_components(mask: np.ndarray) -> int:
    """Number of 4-connected components of a boolean raster."""
    _, count = ndimage.label(mask)

    return int(count)


def _disjoint(region: SafeRegion) -> bool:
    if len(region.boundaries) < 2:
        return False

    extent = Extent.of_well(region.params.xi_max)
    masks = [rasterize(region, extent, boundaries=(boundary,)) for boundary in region.boundaries]
    total = np.sum(masks, axis=0)

    return bool(np.all(total <= 1)) and count_components(total > 0) >= 2


def analytic_basin(params: ModelParams, coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> SafeRegion:
    """Assembles every boundary present at params; an empty region means no initial condition is predicted safe."""
    ctx = FirstIntegralContext(params.F, params.Omega, coupling)

    if params.F == 0.0:
        boundaries = [_unforced_boundary(params.xi_max, ctx)]
    else:
        boundaries = trace_sbmt_all(ctx, params.xi_max) if params.xi_max < SEPARATRIX_ENERGY else []
        sbst = trace_sbst(ctx, params.xi_max)
        if sbst is not None:
            boundaries.append(sbst)

    mapped = tuple(replace(b, plane_polylines=map_to_ic_plane(b, params.Psi)) for b in boundaries)
    region = SafeRegion(params, mapped, coexisting=len({b.basin_type for b in mapped}) > 1)
    region = replace(region, disjoint=_disjoint(region))

    logger.info('Analytic basin at %s: %s', params.to_dict(),
                ', '.join(b.basin_type.value for b in mapped) or 'empty')

    return region


def boundary_rows(region: SafeRegion) -> Iterator[tuple[int, str, float, float, float, float]]:
    """(branch_id, basin_type, gamma, xi, q0, p0) per cylinder sample, for the boundary CSV."""
    for branch_id, boundary in enumerate(region.boundaries):
        gamma, xi = boundary.cylinder_polyline[:, 0], boundary.cylinder_polyline[:, 1]
        xi_eval = np.minimum(xi, XI_CEILING)
        theta = gamma + region.params.Psi
        q0 = np.asarray(q_of_angle(theta, xi_eval))
        p0 = np.asarray(p_of_angle(theta, xi_eval))
        for i in range(gamma.size):
            yield branch_id, boundary.basin_type.value, float(gamma[i]), float(xi[i]), float(q0[i]), float(p0[i])
