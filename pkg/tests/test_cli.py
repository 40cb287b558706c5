import math
from pathlib import Path

import numpy as np
import pytest

import cli.Artifacts as artifacts
from cli.Application import EXIT_BAD_INPUT, EXIT_OK, build_parser, load_config, main
from cli.Artifacts import ArtifactRegistry, format_value
from cli.Commands import OUT_ENV, CommandHandler, resolve_out_dir
from cli.ConfigExceptions import ConfigError
from cli.RunConfig import RunConfig
from cli.SelfTest import CHECKS, check_coupling_deviation, run_selftest
from dynamics.ActionAngle import CouplingKind
from dynamics.Model import CriterionKind, EscapeCriterion, Extent, ModelParams
from resonance.Basin import analytic_basin
from resonance.SlowFlow import EnvelopePoint, MechanismKind
from simulation.Simulate import AreaPoint, BasinGrid, CriteriaRow, NumericThreshold

RECIPES = sorted((Path(__file__).resolve().parent.parent / 'recipes').glob('*.toml'))

UNFORCED_BASIN = """
[model]
F = 0.0
Omega = 0.9
xi_max = 0.2
"""


@pytest.mark.parametrize('path', RECIPES, ids=lambda path: path.stem)
def test_recipes_round_trip(path):
    config = RunConfig.load(path)
    assert RunConfig.loads(config.dumps()) == config


def test_defaults_round_trip():
    config = RunConfig()
    assert RunConfig.loads(config.dumps()) == config
    assert config.model.coupling_kind is CouplingKind.CLOSED_FORM
    assert config.run.criterion_kind is CriterionKind.DISPLACEMENT
    assert config.run.plane_extent == Extent.square()


def test_sweep_grid_from_table():
    config = RunConfig.loads('[sweep]\nomega = { start = 0.5, stop = 1.0, num = 6 }\n')
    assert config.sweep.omega == pytest.approx((0.5, 0.6, 0.7, 0.8, 0.9, 1.0))


def test_slow_initial_condition():
    config = RunConfig.loads('[ic]\ngamma = 0.25\nxi = 0.15\n')
    assert config.ic.is_slow
    state = config.ic.slow_state(1.0)
    assert (state.gamma, state.xi) == (0.25, 0.15)


@pytest.mark.parametrize('text, key', [
    ('[model]\nG = 1.0\n', 'model.G'),
    ('[model]\nxi_max = 0.3\n', 'model.xi_max'),
    ('[model]\nF = "strong"\n', 'model.F'),
    ('[model]\ncoupling = "exact"\n', 'model.coupling'),
    ('[ic]\nq = 0.0\ngamma = 1.0\n', 'ic'),
    ('[ic]\ngamma = 0.0\nxi = 0.3\n', 'ic.xi'),
    ('[sweep]\nomega = [1.0, 0.9]\n', 'sweep.omega'),
    ('[sweep]\nomega = { start = 0.5, stop = 1.0 }\n', 'sweep.omega.num'),
    ('[sweep]\nxi_max = [0.1, 0.3]\n', 'sweep.xi_max'),
    ('[run]\nresolution = [1, 10]\n', 'run.resolution[0]'),
    ('[run]\ncriterion = "speed"\n', 'run.criterion'),
    ('[run]\nworkers = 0\n', 'run.workers'),
    ('[run]\nhorizon_ec = -5.0\n', 'run.horizon_ec'),
    ('[run]\nextent = [1.0, -1.0, -1.0, 1.0]\n', 'run.extent'),
    ('[run]\nfcr_bracket = [0.2, 0.1]\n', 'run.fcr_bracket'),
    ('[chart]\nt_eval_ec = [0.0]\n', 'chart.t_eval_ec'),
    ('[extra]\nvalue = 1\n', 'config.extra'),
    ('[model\n', 'config'),
])
def test_invalid_configurations(text, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.loads(text)
    assert info.value.key == key
    assert key in str(info.value)


def test_missing_configuration_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        RunConfig.load(tmp_path / 'absent.toml')
    assert info.value.key == 'config'


def test_fast_profile_clips_evaluation_times():
    config = RunConfig().fast_profile()
    assert config.run.horizon_ec == 500.0
    assert max(config.run.checkpoints_ec) <= 500.0
    assert config.chart.t_eval_ec == (500.0,)


def test_command_line_overrides(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('[run]\nseed = 4\nworkers = 2\n')
    config = load_config(build_parser().parse_args(['basin', '--config', str(path), '--seed', '9', '--fast']))
    assert config.run.seed == 9
    assert config.run.workers == 2
    assert config.run.horizon_ec == 500.0


def test_output_directory_precedence(monkeypatch):
    config = RunConfig()
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert resolve_out_dir(None, config) == Path('out')
    monkeypatch.setenv(OUT_ENV, 'from-env')
    assert resolve_out_dir(None, config) == Path('from-env')
    assert resolve_out_dir(None, config.with_run(out='from-config')) == Path('from-config')
    assert resolve_out_dir('from-flag', config.with_run(out='from-config')) == Path('from-flag')


def test_format_value():
    assert format_value(None) == ''
    assert format_value(True) == '1'
    assert format_value(0.1) == '0.10000000000000001'
    assert format_value(np.float64(2.5)) == '2.5'
    assert format_value(7) == '7'


def test_registry_tracks_missing_artifacts(tmp_path):
    registry = ArtifactRegistry()
    registry.request('a.csv')
    registry.request('b.svg')
    registry.request('a.csv')
    registry.set_written('a.csv', tmp_path / 'a.csv')
    assert registry.requested == ['a.csv', 'b.svg']
    assert registry.missing == ['b.svg']
    assert not registry.all_written


def test_threshold_csv_round_trip(tmp_path):
    points = [EnvelopePoint(0.9, 0.0312, MechanismKind.SM), EnvelopePoint(1.1, 1 / 3, MechanismKind.MM)]
    path = artifacts.write_fcr_csv(tmp_path / 'fcr.csv', points)
    assert artifacts.read_fcr_csv(path) == [(0.9, 0.0312, 'SM'), (1.1, 1 / 3, 'MM')]

    numeric = artifacts.write_fcr_csv(tmp_path / 'numeric.csv', [NumericThreshold(0.95, 0.04)])
    assert artifacts.read_fcr_csv(numeric) == [(0.95, 0.04, '')]
    assert path.read_text().startswith('omega,f_cr,mechanism\n')


def test_grid_csv_round_trip(tmp_path):
    times = np.array([[np.nan, 12.5], [0.0, np.nan]])
    grid = BasinGrid(Extent.square(), (2, 2), EscapeCriterion.displacement(0.25), 100.0, times)
    rows = artifacts.read_grid_csv(artifacts.write_grid_csv(tmp_path / 'grid.csv', grid))
    assert rows == [(-1.0, -1.0, False, None), (1.0, -1.0, True, 12.5),
                    (-1.0, 1.0, True, 0.0), (1.0, 1.0, False, None)]


def test_criteria_and_area_csv_round_trip(tmp_path):
    rows = [CriteriaRow(0.001, 0, 120, 100, 0.2), CriteriaRow(0.006, 1, 0, 0, math.nan)]
    read = artifacts.read_criteria_csv(artifacts.write_criteria_csv(tmp_path / 'criteria.csv', rows))
    assert read[0] == rows[0]
    assert math.isnan(read[1].rel_diff)

    series = [AreaPoint(250.0, 4000), AreaPoint(500.0, 3900)]
    assert artifacts.read_area_csv(artifacts.write_area_csv(tmp_path / 'area.csv', series)) == series


def test_reader_rejects_foreign_header(tmp_path):
    path = tmp_path / 'other.csv'
    path.write_text('a,b\n1,2\n')
    with pytest.raises(ValueError):
        artifacts.read_area_csv(path)


def test_basin_plot_is_svg(tmp_path):
    region = analytic_basin(ModelParams(F=0.0, Omega=0.9, xi_max=0.2))
    path = artifacts.plot_basin(tmp_path / 'basin.svg', region)
    assert '<svg' in path.read_text()


def test_threshold_curve_command(tmp_path):
    config = RunConfig.loads('[model]\nxi_max = 0.2\n[sweep]\nomega = [0.9, 1.1]\n')
    handler = CommandHandler(config, tmp_path)
    try:
        paths = handler.cmd_fcr_curve()
    finally:
        handler.close()
    assert {path.name for path in paths} == {'fcr_analytic.csv', 'fcr_curve.svg'}
    rows = artifacts.read_fcr_csv(tmp_path / 'fcr_analytic.csv')
    assert [row[0] for row in rows] == [0.9, 1.1]
    assert all(row[1] > 0.0 for row in rows)
    assert handler.registry.all_written


def test_threshold_curve_needs_frequencies(tmp_path):
    handler = CommandHandler(RunConfig(), tmp_path)
    with pytest.raises(ConfigError):
        handler.cmd_fcr_curve()
    handler.close()


def test_basin_command_writes_artifacts(tmp_path):
    config_path = tmp_path / 'basin.toml'
    config_path.write_text(UNFORCED_BASIN)
    out = tmp_path / 'out'
    assert main(['basin', '--config', str(config_path), '--out', str(out)]) == EXIT_OK
    assert (out / 'basin_boundary.csv').exists()
    assert (out / 'basin.svg').exists()
    rows = artifacts.read_boundary_csv(out / 'basin_boundary.csv')
    assert {row[1] for row in rows} == {'SBMT_peninsula'}


def test_invalid_input_exit_code(tmp_path):
    config_path = tmp_path / 'bad.toml'
    config_path.write_text('[model]\nOmega = -1.0\n')
    assert main(['basin', '--config', str(config_path), '--out', str(tmp_path)]) == EXIT_BAD_INPUT
    assert main(['basin', '--workers', '0', '--out', str(tmp_path)]) == EXIT_BAD_INPUT
    assert main(['fcr-curve', '--out', str(tmp_path)]) == EXIT_BAD_INPUT


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['plot'])


def test_selftest_reports_every_check():
    results = run_selftest()
    assert len(results) == len(CHECKS)
    assert len({result.name for result in results}) == len(CHECKS)
    assert all(isinstance(result.passed, bool) for result in results)
    assert all(result.detail.startswith('max deviation') for result in results)


def test_selftest_reports_coupling_deviation(rng):
    result = check_coupling_deviation(rng)
    assert result.name == 'coupling deviation'
    assert result.passed
