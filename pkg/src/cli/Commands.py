from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np

import cli.Artifacts as artifacts
from cli.Artifacts import ArtifactRegistry
from cli.ConfigExceptions import ConfigError
from cli.RunConfig import APPENDIX_F_GRID, RunConfig
from cli.SelfTest import run_selftest
from dynamics.DynamicsExceptions import DomainError
from dynamics.Model import (CriterionKind, EscapeCriterion, Extent, ModelParams,
                            PhasePoint, in_well)
from resonance.Basin import (analytic_basin, boundary_rows, count_components,
                             rasterize)
from resonance.SlowFlow import EnvelopePoint, fcr_envelope
from simulation.Simulate import (AreaPoint, NumericThreshold, criteria_compare,
                                 criteria_summary, dual_criteria_scan,
                                 fcr_curve_numeric, grid_scan,
                                 mismatch_fraction, nested_basins, strobe_map)
from simulation.WorkerPool import WorkerPool

logger = logging.getLogger(__name__)

OUT_ENV = 'ESCAPE_ATLAS_OUT'
DEFAULT_OUT = 'out'
STROBE_DRAW_ROUNDS = 10


def resolve_out_dir(flag: str | None, config: RunConfig) -> Path:
    """--out flag, then run.out, then $ESCAPE_ATLAS_OUT, then ./out."""
    return Path(flag or config.run.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _format_level(value: float) -> str:
    return format(value, 'g')


def _intersect(a: Extent, b: Extent) -> Extent:
    return Extent(max(a.q_min, b.q_min), min(a.q_max, b.q_max), max(a.p_min, b.p_min), min(a.p_max, b.p_max))


class CommandHandler:
    """Facade for the subcommands exposed by the command line.

    Attributes:
        config (RunConfig): configuration after command-line overrides.
        out_dir (Path): directory receiving every artifact.
        verify (bool): whether numeric verification runs alongside the analytic prediction.
        registry (ArtifactRegistry): requested and written artifacts.
        pool (WorkerPool): worker pool shared by all sweeps.
    """

    def __init__(self, config: RunConfig, out_dir: Path, verify: bool = False) -> None:
        self.config: RunConfig = config
        self.out_dir: Path = out_dir
        self.verify: bool = verify
        self.registry: ArtifactRegistry = ArtifactRegistry()
        self.pool: WorkerPool = WorkerPool(config.run.workers)

    def close(self) -> None:
        self.pool.close()

    def _write(self, name: str, writer, *args) -> Path:
        self.registry.request(name)
        path = writer(self.out_dir / name, *args)
        self.registry.set_written(name, path)

        return path

    def _criterion(self, xi_max: float) -> EscapeCriterion:
        return EscapeCriterion.of(self.config.run.criterion_kind, xi_max)

    def _params(self, **changes: float) -> ModelParams:
        try:
            return self.config.model.params(**changes)
        except DomainError as error:
            raise ConfigError(f'model.{error.name}', str(error)) from None

    def cmd_fcr_curve(self) -> list[Path]:
        """Analytic threshold curve per truncation level, with the numeric overlay under verify."""
        config = self.config
        if not config.sweep.omega:
            raise ConfigError('sweep.omega', 'the frequency sweep is required by fcr-curve')

        levels = config.sweep.xi_max or (config.model.xi_max,)
        if any(level >= 0.25 for level in levels):
            raise ConfigError('sweep.xi_max', 'threshold curves need xi_max < 1/4')

        paths: list[Path] = []
        analytic: dict[str, list[EnvelopePoint]] = {}
        numeric: dict[str, list[NumericThreshold]] = {}
        for xi_max in levels:
            params = self._params(xi_max=xi_max)
            suffix = '' if len(levels) == 1 else f'_ximax_{_format_level(xi_max)}'
            ic = config.ic.slow_state(params.Psi)
            envelope = fcr_envelope(config.sweep.omega, ic, xi_max, config.model.coupling_kind, self.pool)
            analytic[_format_level(xi_max)] = envelope
            paths.append(self._write(f'fcr_analytic{suffix}.csv', artifacts.write_fcr_csv, envelope))

            if self.verify:
                omegas = config.sweep.omega_numeric or config.sweep.omega
                curve = fcr_curve_numeric(omegas, config.ic.phase_point(params.Psi), params, self._criterion(xi_max),
                                          config.run.fcr_bracket, config.run.horizon_ec, pool=self.pool)
                numeric[_format_level(xi_max)] = curve
                paths.append(self._write(f'fcr_numeric{suffix}.csv', artifacts.write_fcr_csv, curve))
                self._report_agreement(xi_max, envelope, curve)

        paths.append(self._write('fcr_curve.svg', artifacts.plot_fcr_curves, analytic, numeric))

        return paths

    def _report_agreement(self, xi_max: float, envelope: list[EnvelopePoint], curve: list[NumericThreshold]) -> None:
        if not envelope:
            return
        omegas = np.array([point.Omega for point in envelope])
        values = np.array([point.F_cr for point in envelope])
        for point in curve:
            predicted = float(np.interp(point.Omega, omegas, values))
            relative = abs(point.F_cr - predicted) / predicted if predicted > 0.0 else float('nan')
            print(f'xi_max={_format_level(xi_max)} Omega={point.Omega:.6g}: '
                  f'numeric {point.F_cr:.6g}, analytic {predicted:.6g}, relative difference {relative:.3g}')

    def cmd_basin(self) -> list[Path]:
        """Analytic boundary, and under verify the numeric grid, its mismatch fraction and nested basins.

        Nested basins are scanned over sweep.F when it holds several amplitudes, otherwise over sweep.xi_max.
        """
        config = self.config
        params = self._params()
        region = analytic_basin(params, config.model.coupling_kind)
        if region.is_empty:
            print(f'Analytic safe region is empty at {params.to_dict()}')
        elif region.coexisting:
            print(f'Coexisting boundaries: {[b.basin_type.value for b in region.boundaries]}, '
                  f'disjoint={region.disjoint}')

        paths = [self._write('basin_boundary.csv', artifacts.write_boundary_csv, boundary_rows(region))]
        grid = None
        if self.verify:
            criterion = self._criterion(params.xi_max)
            extent = config.run.plane_extent
            if criterion.kind is CriterionKind.ENERGY:
                extent = _intersect(extent, Extent.of_well(params.xi_max))
            grid = grid_scan(extent, config.run.resolution, params, criterion, config.run.horizon_ec, self.pool)
            paths.append(self._write('basin_grid.csv', artifacts.write_grid_csv, grid))

            predicted = rasterize(region, grid.extent, grid.resolution)
            mismatch = mismatch_fraction(predicted, grid, params.xi_max)
            print(f'Mismatch fraction {mismatch:.4f} over in-well cells; '
                  f'{count_components(grid.safe)} numeric safe component(s)')

            if len(config.sweep.F) > 1 or len(config.sweep.xi_max) > 1:
                params_list = ([self._params(F=F) for F in config.sweep.F] if len(config.sweep.F) > 1
                               else [self._params(xi_max=xi_max) for xi_max in config.sweep.xi_max])
                depth = nested_basins(extent, config.run.resolution, params_list, config.run.criterion_kind,
                                      config.run.horizon_ec, self.pool)
                paths.append(self._write('basin_nested.svg', artifacts.plot_nested, depth, extent))

        paths.append(self._write('basin.svg', artifacts.plot_basin, region, grid, config.model.coupling_kind))

        return paths

    def _draw_in_well(self, rng: np.random.Generator, count: int, xi_max: float) -> list[PhasePoint]:
        extent = Extent.of_well(xi_max)
        points: list[PhasePoint] = []
        while len(points) < count:
            q = rng.uniform(extent.q_min, extent.q_max, count)
            p = rng.uniform(extent.p_min, extent.p_max, count)
            keep = in_well(q, p, xi_max)
            points.extend(PhasePoint(float(a), float(b)) for a, b in zip(q[keep], p[keep]))

        return points[:count]

    def cmd_strobe(self) -> list[Path]:
        """Period-map portrait of n_ics non-escaping orbits drawn at random inside the well."""
        config = self.config
        params = self._params()
        rng = np.random.default_rng(config.run.seed)
        criterion = self._criterion(params.xi_max)

        kept = []
        for _ in range(STROBE_DRAW_ROUNDS):
            ics = self._draw_in_well(rng, config.run.n_ics, params.xi_max)
            orbits = strobe_map(ics, params, config.run.n_iters, criterion, self.pool)
            kept.extend(orbit for orbit in orbits if not orbit.escaped)
            if len(kept) >= config.run.n_ics:
                break
        kept = kept[:config.run.n_ics]
        if len(kept) < config.run.n_ics:
            logger.warning('Only %d of %d requested orbits stayed in the well', len(kept), config.run.n_ics)

        region = analytic_basin(params, config.model.coupling_kind)

        return [self._write('strobe.csv', artifacts.write_strobe_csv, kept),
                self._write('strobe.svg', artifacts.plot_strobe, kept, region)]

    def cmd_appendix(self) -> list[Path]:
        """Criteria comparison on random initial conditions, area decay and dual-criteria charts."""
        config = self.config
        params = self._params()
        F_list = config.sweep.F or APPENDIX_F_GRID
        rows = criteria_compare(params, F_list, config.run.criteria_ics, config.run.n_repeats, config.run.seed,
                                config.run.plane_extent, config.run.horizon_ec, self.pool,
                                verify_containment=self.verify)
        violations = sum(row.violations for row in rows)
        if violations:
            print(f'Containment violated by {violations} initial condition(s)')
        summary = criteria_summary(rows)
        paths = [self._write('criteria.csv', artifacts.write_criteria_csv, rows),
                 self._write('criteria_summary.csv', artifacts.write_summary_csv, summary),
                 self._write('criteria.svg', artifacts.plot_criteria, summary)]

        chart = config.chart
        checkpoints = config.run.checkpoints_ec
        horizon = max(chart.t_eval_ec[-1], checkpoints[-1])
        displacement, energy = dual_criteria_scan(config.run.plane_extent, chart.resolution, chart.params(),
                                                  horizon, self.pool)
        for t_eval in chart.t_eval_ec:
            name = f'chart_t{_format_level(t_eval)}.svg'
            paths.append(self._write(name, artifacts.plot_dual_chart, displacement.safe_at(t_eval),
                                     energy.safe_at(t_eval), displacement.extent, t_eval))

        series = {grid.criterion.kind.value: [AreaPoint(t, int(np.count_nonzero(grid.safe_at(t))))
                                              for t in checkpoints]
                  for grid in (displacement, energy)}
        paths.append(self._write('area.csv', artifacts.write_area_csv, series[config.run.criterion]))
        paths.append(self._write('area.svg', artifacts.plot_area, series))

        return paths

    def cmd_selftest(self) -> bool:
        results = run_selftest()
        for result in results:
            print(f'{"PASS" if result.passed else "FAIL"} {result.name}: {result.detail}')

        return all(result.passed for result in results)
