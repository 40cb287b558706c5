"""CSV and SVG artifacts written by the subcommands, and the readers used to re-parse the CSVs.

CSV floats carry 17 significant digits with LF line endings, so a file read
back reproduces the written values exactly.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from matplotlib.figure import Figure

from dynamics.ActionAngle import CouplingKind
from dynamics.Model import Extent
from resonance.Basin import LevelGrid, SafeRegion
from resonance.SlowFlow import XI_CEILING, EnvelopePoint, FirstIntegralContext
from simulation.Simulate import (AreaPoint, BasinGrid, CriteriaRow,
                                 CriteriaSummary, NumericThreshold,
                                 StrobeOrbit)

FCR_HEADER = ('omega', 'f_cr', 'mechanism')
BOUNDARY_HEADER = ('branch_id', 'basin_type', 'gamma', 'xi', 'q0', 'p0')
GRID_HEADER = ('q0', 'p0', 'escaped', 'escape_time_ec')
STROBE_HEADER = ('traj_id', 'iter', 'q', 'p')
CRITERIA_HEADER = ('F', 'repeat', 'A_q', 'A_E', 'rel_diff')
SUMMARY_HEADER = ('F', 'min', 'mean', 'max')
AREA_HEADER = ('t_eval_ec', 'safe_pixels')


class ArtifactRegistry:
    """Tracks the files a command was asked to produce and the ones it wrote.

    Attributes:
        requested (list[str]): artifact names in request order.
        written (dict[str, Path]): artifact names mapped to the written file.
    """

    def __init__(self) -> None:
        self.requested: list[str] = []
        self.written: dict[str, Path] = {}

    def request(self, name: str) -> None:
        if name not in self.requested:
            self.requested.append(name)

    def set_written(self, name: str, path: Path) -> None:
        self.written[name] = path
        print(f'Wrote {path}')

    @property
    def missing(self) -> list[str]:
        return [name for name in self.requested if name not in self.written]

    @property
    def all_written(self) -> bool:
        return not self.missing


def format_value(value: object) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')

    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])

    return path


def _read_csv(path: Path, header: Sequence[str]) -> list[list[str]]:
    with open(path, newline='', encoding='utf-8') as file:
        reader = csv.reader(file)
        found = next(reader, None)
        if found != list(header):
            raise ValueError(f'{path} has header {found}, expected {list(header)}.')

        return [row for row in reader]


def _optional_float(text: str) -> float | None:
    return float(text) if text else None


def write_fcr_csv(path: Path, points: Iterable[EnvelopePoint | NumericThreshold]) -> Path:
    """Analytic points carry their mechanism, numeric ones an empty mechanism."""
    rows = ((point.Omega, point.F_cr, point.mechanism.value if isinstance(point, EnvelopePoint) else '')
            for point in points)

    return _write_csv(path, FCR_HEADER, rows)


def read_fcr_csv(path: Path) -> list[tuple[float, float, str]]:
    return [(float(omega), float(f_cr), mechanism) for omega, f_cr, mechanism in _read_csv(path, FCR_HEADER)]


def write_boundary_csv(path: Path, rows: Iterable[tuple[int, str, float, float, float, float]]) -> Path:
    return _write_csv(path, BOUNDARY_HEADER, rows)


def read_boundary_csv(path: Path) -> list[tuple[int, str, float, float, float, float]]:
    return [(int(branch), kind, float(gamma), float(xi), float(q0), float(p0))
            for branch, kind, gamma, xi, q0, p0 in _read_csv(path, BOUNDARY_HEADER)]


def write_grid_csv(path: Path, grid: BasinGrid) -> Path:
    return _write_csv(path, GRID_HEADER, grid.rows())


def read_grid_csv(path: Path) -> list[tuple[float, float, bool, float | None]]:
    return [(float(q0), float(p0), escaped == '1', _optional_float(time))
            for q0, p0, escaped, time in _read_csv(path, GRID_HEADER)]


def write_strobe_csv(path: Path, orbits: Sequence[StrobeOrbit]) -> Path:
    rows = ((traj_id, i + 1, float(q), float(p))
            for traj_id, orbit in enumerate(orbits) for i, (q, p) in enumerate(orbit.samples))

    return _write_csv(path, STROBE_HEADER, rows)


def read_strobe_csv(path: Path) -> list[tuple[int, int, float, float]]:
    return [(int(traj), int(it), float(q), float(p)) for traj, it, q, p in _read_csv(path, STROBE_HEADER)]


def write_criteria_csv(path: Path, rows: Iterable[CriteriaRow]) -> Path:
    return _write_csv(path, CRITERIA_HEADER, ((r.F, r.repeat, r.A_q, r.A_E, r.rel_diff) for r in rows))


def read_criteria_csv(path: Path) -> list[CriteriaRow]:
    return [CriteriaRow(float(F), int(repeat), int(a_q), int(a_e), float(rel_diff))
            for F, repeat, a_q, a_e, rel_diff in _read_csv(path, CRITERIA_HEADER)]


def write_summary_csv(path: Path, rows: Iterable[CriteriaSummary]) -> Path:
    return _write_csv(path, SUMMARY_HEADER, rows)


def read_summary_csv(path: Path) -> list[CriteriaSummary]:
    return [CriteriaSummary(*(float(value) for value in row)) for row in _read_csv(path, SUMMARY_HEADER)]


def write_area_csv(path: Path, points: Iterable[AreaPoint]) -> Path:
    return _write_csv(path, AREA_HEADER, points)


def read_area_csv(path: Path) -> list[AreaPoint]:
    return [AreaPoint(float(t), int(pixels)) for t, pixels in _read_csv(path, AREA_HEADER)]


def _save(figure: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format='svg', bbox_inches='tight')

    return path


def plot_fcr_curves(path: Path, analytic: dict[str, list[EnvelopePoint]],
                    numeric: dict[str, list[NumericThreshold]]) -> Path:
    figure = Figure(figsize=(6.0, 4.5))
    ax = figure.add_subplot()
    for label, points in analytic.items():
        line, = ax.plot([pt.Omega for pt in points], [pt.F_cr for pt in points], label=f'analytic {label}')
        numeric_points = numeric.get(label, [])
        if numeric_points:
            ax.plot([pt.Omega for pt in numeric_points], [pt.F_cr for pt in numeric_points], 'o',
                    color=line.get_color(), markersize=3, label=f'numeric {label}')
    ax.set_xlabel(r'$\Omega$')
    ax.set_ylabel(r'$F_{cr}$')
    ax.legend(fontsize='small')

    return _save(figure, path)


def plot_basin(path: Path, region: SafeRegion, grid: BasinGrid | None = None,
               coupling: CouplingKind = CouplingKind.CLOSED_FORM) -> Path:
    """Level curves of C on the cylinder beside the (q0, p0) plane, numeric safe cells shaded when given."""
    params = region.params
    figure = Figure(figsize=(11.0, 4.5))
    left, right = figure.subplots(1, 2)

    if params.F > 0.0:
        levels = LevelGrid(FirstIntegralContext(params.F, params.Omega, coupling), min(params.xi_max, XI_CEILING))
        left.contour(levels.gammas, levels.xis, levels.table.T, levels=30, linewidths=0.5, colors='0.6')
    for boundary in region.boundaries:
        left.plot(boundary.cylinder_polyline[:, 0], boundary.cylinder_polyline[:, 1], 'k.', markersize=1,
                  label=boundary.basin_type.value)
    left.axhline(params.xi_max, color='r', linestyle='--', linewidth=0.8)
    if region.boundaries:
        left.legend(fontsize='small', markerscale=6)
    left.set_xlim(0.0, 2.0 * math.pi)
    left.set_xlabel(r'$\gamma$')
    left.set_ylabel(r'$\xi$')

    if grid is not None:
        extent = grid.extent
        right.imshow(grid.safe, origin='lower', cmap='Greys', alpha=0.5, aspect='auto',
                     extent=(extent.q_min, extent.q_max, extent.p_min, extent.p_max))
    for boundary in region.boundaries:
        for loop in boundary.plane_polylines:
            right.plot(loop[:, 0], loop[:, 1], 'b-', linewidth=1.0)
    right.set_xlabel(r'$q_0$')
    right.set_ylabel(r'$p_0$')
    right.set_title(f'F={params.F:g}, Omega={params.Omega:g}, Psi={params.Psi:.3g}, xi_max={params.xi_max:g}',
                    fontsize='small')

    return _save(figure, path)


def plot_nested(path: Path, depth: np.ndarray, grid_extent: Extent) -> Path:
    """Nested safe basins: lighter cells are safe for more parameter sets."""
    figure = Figure(figsize=(5.5, 5.0))
    ax = figure.add_subplot()
    ax.imshow(depth, origin='lower', cmap='Greys_r', aspect='auto',
              extent=(grid_extent.q_min, grid_extent.q_max, grid_extent.p_min, grid_extent.p_max))
    ax.set_xlabel(r'$q_0$')
    ax.set_ylabel(r'$p_0$')

    return _save(figure, path)


def plot_strobe(path: Path, orbits: Sequence[StrobeOrbit], region: SafeRegion | None = None) -> Path:
    figure = Figure(figsize=(5.5, 5.0))
    ax = figure.add_subplot()
    for orbit in orbits:
        if len(orbit.samples):
            ax.plot(orbit.samples[:, 0], orbit.samples[:, 1], ',', markersize=0.5)
    if region is not None:
        for boundary in region.boundaries:
            for loop in boundary.plane_polylines:
                ax.plot(loop[:, 0], loop[:, 1], 'k--', linewidth=0.8)
    ax.set_xlabel('q')
    ax.set_ylabel('p')

    return _save(figure, path)


def plot_dual_chart(path: Path, displacement_safe: np.ndarray, energy_safe: np.ndarray, extent: Extent,
                    t_eval_ec: float) -> Path:
    """Grey marks displacement-safe cells, black the energy-safe ones."""
    shade = np.where(energy_safe, 0.0, np.where(displacement_safe, 0.6, 1.0))
    figure = Figure(figsize=(5.5, 5.0))
    ax = figure.add_subplot()
    ax.imshow(shade, origin='lower', cmap='gray', vmin=0.0, vmax=1.0, aspect='auto',
              extent=(extent.q_min, extent.q_max, extent.p_min, extent.p_max))
    ax.set_title(f't_eval = {t_eval_ec:g} EC', fontsize='small')
    ax.set_xlabel(r'$q_0$')
    ax.set_ylabel(r'$p_0$')

    return _save(figure, path)


def plot_area(path: Path, series: dict[str, list[AreaPoint]]) -> Path:
    figure = Figure(figsize=(6.0, 4.0))
    ax = figure.add_subplot()
    for label, points in series.items():
        pixels = np.array([pt.safe_pixels for pt in points], dtype=float)
        ax.plot([pt.t_eval_ec for pt in points], np.log(np.where(pixels > 0, pixels, np.nan)), 'o-', label=label)
    ax.set_xlabel('t_eval (EC)')
    ax.set_ylabel('log safe pixels')
    ax.legend(fontsize='small')

    return _save(figure, path)


def plot_criteria(path: Path, summary: Sequence[CriteriaSummary]) -> Path:
    figure = Figure(figsize=(6.0, 4.0))
    ax = figure.add_subplot()
    F = [row.F for row in summary]
    for name in ('min', 'mean', 'max'):
        ax.plot(F, [getattr(row, name) for row in summary], 'o', label=name)
    ax.set_xlabel('F')
    ax.set_ylabel(r'$(A_q - A_E)/A_E$')
    ax.legend(fontsize='small')

    return _save(figure, path)
