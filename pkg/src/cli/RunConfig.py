"""Run configuration: a TOML file of [model], [ic], [sweep], [run] and [chart] tables.

Parsing then serializing then parsing again yields an identical RunConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import tomli
import tomli_w

from cli.ConfigExceptions import ConfigError
from dynamics.ActionAngle import (CouplingKind, SlowState, phase_point_of_slow,
                                  slow_coords_of_ic)
from dynamics.DynamicsExceptions import DomainError
from dynamics.Model import CriterionKind, Extent, ModelParams, PhasePoint
from simulation.Simulate import DEFAULT_HORIZON_EC, FAST_HORIZON_EC

APPENDIX_F_GRID = tuple(round(0.001 + 0.005 * i, 10) for i in range(15))


def _float(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f'expected a number, got {value!r}')
    if not math.isfinite(value):
        raise ConfigError(key, f'expected a finite number, got {value!r}')

    return float(value)


def _int(value: Any, key: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f'expected an integer, got {value!r}')
    if value < minimum:
        raise ConfigError(key, f'expected at least {minimum}, got {value}')

    return value


def _floats(value: Any, key: str, length: int | None = None) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(key, f'expected a list, got {value!r}')
    if length is not None and len(value) != length:
        raise ConfigError(key, f'expected {length} values, got {len(value)}')

    return tuple(_float(item, f'{key}[{i}]') for i, item in enumerate(value))


def _increasing(values: tuple[float, ...], key: str) -> tuple[float, ...]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(key, 'values must be strictly increasing')

    return values


def _grid(value: Any, key: str) -> tuple[float, ...]:
    """A sweep grid given either as an explicit list or as a {start, stop, num} table."""
    if isinstance(value, dict):
        _reject_unknown(value, {'start', 'stop', 'num'}, key)
        try:
            start, stop = _float(value['start'], f'{key}.start'), _float(value['stop'], f'{key}.stop')
            num = _int(value['num'], f'{key}.num', minimum=1)
        except KeyError as missing:
            raise ConfigError(f'{key}.{missing.args[0]}', 'missing') from None
        values = tuple(float(v) for v in np.linspace(start, stop, num))
    else:
        values = _floats(value, key)

    return _increasing(values, key)


def _reject_unknown(table: dict, allowed: set[str], prefix: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f'{prefix}.{key}', 'unknown key')


def _table(raw: dict, name: str) -> dict:
    table = raw.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError(name, 'expected a table')

    return table


@dataclass(frozen=True)
class ModelSection:
    F: float = 0.0
    Omega: float = 1.0
    Psi: float = 0.0
    xi_max: float = 0.25
    coupling: str = CouplingKind.CLOSED_FORM.value

    def params(self, **changes: float) -> ModelParams:
        values = {'F': self.F, 'Omega': self.Omega, 'Psi': self.Psi, 'xi_max': self.xi_max} | changes

        return ModelParams(**values)

    @property
    def coupling_kind(self) -> CouplingKind:
        return CouplingKind(self.coupling)

    @classmethod
    def from_dict(cls, table: dict, name: str = 'model') -> ModelSection:
        _reject_unknown(table, {f.name for f in fields(cls)}, name)
        section = cls(**{key: (value if key == 'coupling' else _float(value, f'{name}.{key}'))
                         for key, value in table.items()})
        try:
            CouplingKind(section.coupling)
        except ValueError:
            raise ConfigError(f'{name}.coupling', f"expected one of {[k.value for k in CouplingKind]}") from None
        try:
            section.params()
        except DomainError as error:
            raise ConfigError(f'{name}.{error.name}', str(error)) from None

        return section

    def to_dict(self) -> dict:
        return {'F': self.F, 'Omega': self.Omega, 'Psi': self.Psi, 'xi_max': self.xi_max, 'coupling': self.coupling}


@dataclass(frozen=True)
class InitialCondition:
    """Initial condition given either in the (q, p) plane or on the (gamma, xi) cylinder.

    Attributes:
        q (float | None): displacement, with p.
        p (float | None): momentum, with q.
        gamma (float | None): slow phase, with xi.
        xi (float | None): energy, with gamma.
    """

    q: float | None = 0.0
    p: float | None = 0.0
    gamma: float | None = None
    xi: float | None = None

    @property
    def is_slow(self) -> bool:
        return self.gamma is not None

    def phase_point(self, Psi: float) -> PhasePoint:
        if self.is_slow:
            return phase_point_of_slow(SlowState(self.gamma, self.xi), Psi)

        return PhasePoint(self.q, self.p)

    def slow_state(self, Psi: float) -> SlowState:
        if self.is_slow:
            return SlowState(self.gamma, self.xi)

        return slow_coords_of_ic(self.phase_point(Psi), Psi)

    @classmethod
    def from_dict(cls, table: dict) -> InitialCondition:
        _reject_unknown(table, {'q', 'p', 'gamma', 'xi'}, 'ic')
        if not table:
            return cls()

        keys = set(table)
        if keys == {'q', 'p'}:
            return cls(_float(table['q'], 'ic.q'), _float(table['p'], 'ic.p'))
        if keys == {'gamma', 'xi'}:
            condition = cls(None, None, _float(table['gamma'], 'ic.gamma'), _float(table['xi'], 'ic.xi'))
            try:
                condition.slow_state(0.0)
            except DomainError as error:
                raise ConfigError(f'ic.{error.name}', str(error)) from None
            return condition

        raise ConfigError('ic', 'give exactly one representation: q and p, or gamma and xi')

    def to_dict(self) -> dict:
        if self.is_slow:
            return {'gamma': self.gamma, 'xi': self.xi}

        return {'q': self.q, 'p': self.p}


@dataclass(frozen=True)
class SweepSection:
    omega: tuple[float, ...] = ()
    F: tuple[float, ...] = ()
    xi_max: tuple[float, ...] = ()
    omega_numeric: tuple[float, ...] = ()

    @classmethod
    def from_dict(cls, table: dict) -> SweepSection:
        _reject_unknown(table, {f.name for f in fields(cls)}, 'sweep')
        section = cls(**{key: _grid(value, f'sweep.{key}') for key, value in table.items()})
        for key in ('omega', 'omega_numeric', 'F'):
            values = getattr(section, key)
            if values and values[0] <= 0.0 and key != 'F':
                raise ConfigError(f'sweep.{key}', 'frequencies must be positive')
            if key == 'F' and values and values[0] < 0.0:
                raise ConfigError('sweep.F', 'forcing amplitudes must be nonnegative')
        if section.xi_max and not (section.xi_max[0] > 0.0 and section.xi_max[-1] <= 0.25):
            raise ConfigError('sweep.xi_max', 'truncation levels must lie in (0, 1/4]')

        return section

    def to_dict(self) -> dict:
        return {f.name: list(getattr(self, f.name)) for f in fields(self) if getattr(self, f.name)}


@dataclass(frozen=True)
class RunSection:
    horizon_ec: float = DEFAULT_HORIZON_EC
    resolution: tuple[int, int] = (200, 200)
    seed: int = 0
    workers: int = 1
    out: str | None = None
    n_ics: int = 100
    n_iters: int = 3000
    n_repeats: int = 5
    criteria_ics: int = 10000
    extent: tuple[float, float, float, float] = (-1.0, 1.0, -1.0, 1.0)
    checkpoints_ec: tuple[float, ...] = (250.0, 500.0, 1000.0, 1500.0, 2000.0, 3000.0, 5000.0, 8000.0, 11000.0)
    criterion: str = CriterionKind.DISPLACEMENT.value
    fcr_bracket: tuple[float, float] = (0.0, 0.2)

    @property
    def criterion_kind(self) -> CriterionKind:
        return CriterionKind(self.criterion)

    @property
    def plane_extent(self) -> Extent:
        return Extent(*self.extent)

    @classmethod
    def from_dict(cls, table: dict) -> RunSection:
        _reject_unknown(table, {f.name for f in fields(cls)}, 'run')
        values: dict[str, Any] = {}
        for key, value in table.items():
            name = f'run.{key}'
            match key:
                case 'horizon_ec':
                    values[key] = _float(value, name)
                    if values[key] <= 0.0:
                        raise ConfigError(name, 'must be positive')
                case 'resolution':
                    if not isinstance(value, list) or len(value) != 2:
                        raise ConfigError(name, 'expected [nx, ny]')
                    values[key] = tuple(_int(item, f'{name}[{i}]', minimum=2) for i, item in enumerate(value))
                case 'seed':
                    values[key] = _int(value, name)
                case 'workers' | 'n_ics' | 'n_iters' | 'n_repeats' | 'criteria_ics':
                    values[key] = _int(value, name, minimum=1)
                case 'out':
                    if not isinstance(value, str):
                        raise ConfigError(name, 'expected a path string')
                    values[key] = value
                case 'extent':
                    extent = _floats(value, name, length=4)
                    if not (extent[0] < extent[1] and extent[2] < extent[3]):
                        raise ConfigError(name, 'expected [q_min, q_max, p_min, p_max] with min < max')
                    values[key] = extent
                case 'checkpoints_ec':
                    values[key] = _increasing(_floats(value, name), name)
                    if not values[key] or values[key][0] <= 0.0:
                        raise ConfigError(name, 'expected positive evaluation times')
                case 'criterion':
                    if value not in {kind.value for kind in CriterionKind}:
                        raise ConfigError(name, f'expected one of {[kind.value for kind in CriterionKind]}')
                    values[key] = value
                case 'fcr_bracket':
                    bracket = _increasing(_floats(value, name, length=2), name)
                    if bracket[0] < 0.0:
                        raise ConfigError(name, 'forcing must be nonnegative')
                    values[key] = bracket

        return cls(**values)

    def to_dict(self) -> dict:
        table = {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

        return {key: list(value) if isinstance(value, tuple) else value for key, value in table.items()}


@dataclass(frozen=True)
class ChartSection:
    """Parameters of the dual-criteria escape charts and the area-decay series."""

    F: float = 0.0876
    Omega: float = 0.95
    Psi: float = math.pi
    xi_max: float = 0.25
    resolution: tuple[int, int] = (300, 300)
    t_eval_ec: tuple[float, ...] = (500.0, 11000.0)

    def params(self) -> ModelParams:
        return ModelParams(self.F, self.Omega, self.Psi, self.xi_max)

    @classmethod
    def from_dict(cls, table: dict) -> ChartSection:
        _reject_unknown(table, {f.name for f in fields(cls)}, 'chart')
        values: dict[str, Any] = {}
        for key, value in table.items():
            name = f'chart.{key}'
            if key == 'resolution':
                if not isinstance(value, list) or len(value) != 2:
                    raise ConfigError(name, 'expected [nx, ny]')
                values[key] = tuple(_int(item, f'{name}[{i}]', minimum=2) for i, item in enumerate(value))
            elif key == 't_eval_ec':
                values[key] = _increasing(_floats(value, name), name)
                if not values[key] or values[key][0] <= 0.0:
                    raise ConfigError(name, 'expected positive evaluation times')
            else:
                values[key] = _float(value, name)

        section = cls(**values)
        try:
            section.params()
        except DomainError as error:
            raise ConfigError(f'chart.{error.name}', str(error)) from None

        return section

    def to_dict(self) -> dict:
        return {'F': self.F, 'Omega': self.Omega, 'Psi': self.Psi, 'xi_max': self.xi_max,
                'resolution': list(self.resolution), 't_eval_ec': list(self.t_eval_ec)}


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one reproduction run.

    Attributes:
        model (ModelSection): forcing and truncation.
        ic (InitialCondition): initial condition for threshold curves.
        sweep (SweepSection): parameter grids.
        run (RunSection): horizon, resolution, seed, workers and output settings.
        chart (ChartSection): parameters of the dual-criteria charts.
    """

    model: ModelSection = field(default_factory=ModelSection)
    ic: InitialCondition = field(default_factory=InitialCondition)
    sweep: SweepSection = field(default_factory=SweepSection)
    run: RunSection = field(default_factory=RunSection)
    chart: ChartSection = field(default_factory=ChartSection)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        _reject_unknown(raw, {f.name for f in fields(cls)}, 'config')

        return cls(ModelSection.from_dict(_table(raw, 'model')),
                   InitialCondition.from_dict(_table(raw, 'ic')),
                   SweepSection.from_dict(_table(raw, 'sweep')),
                   RunSection.from_dict(_table(raw, 'run')),
                   ChartSection.from_dict(_table(raw, 'chart')))

    @classmethod
    def loads(cls, text: str) -> RunConfig:
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as error:
            raise ConfigError('config', f'not valid TOML ({error})') from None

        return cls.from_dict(raw)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        try:
            with open(path, 'rb') as file:
                raw = tomli.load(file)
        except OSError as error:
            raise ConfigError('config', f'cannot read {path} ({error.strerror})') from None
        except tomli.TOMLDecodeError as error:
            raise ConfigError('config', f'{path} is not valid TOML ({error})') from None

        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        tables = {'model': self.model.to_dict(), 'ic': self.ic.to_dict(), 'sweep': self.sweep.to_dict(),
                  'run': self.run.to_dict(), 'chart': self.chart.to_dict()}

        return {name: table for name, table in tables.items() if table}

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def with_run(self, **changes: Any) -> RunConfig:
        return replace(self, run=replace(self.run, **changes))

    def fast_profile(self) -> RunConfig:
        """The 500 EC profile: shorter horizon, evaluation times clipped to it."""
        checkpoints = tuple(t for t in self.run.checkpoints_ec if t <= FAST_HORIZON_EC) or (FAST_HORIZON_EC,)
        t_eval = tuple(t for t in self.chart.t_eval_ec if t <= FAST_HORIZON_EC) or (FAST_HORIZON_EC,)

        return replace(self, run=replace(self.run, horizon_ec=FAST_HORIZON_EC, checkpoints_ec=checkpoints),
                       chart=replace(self.chart, t_eval_ec=t_eval))
