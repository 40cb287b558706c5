"""Command-line surface: argument parsing, configuration overrides and exit codes."""

from __future__ import annotations

import argparse
import logging
import sys

from cli.Commands import CommandHandler, resolve_out_dir
from cli.ConfigExceptions import ConfigError
from cli.RunConfig import RunConfig
from dynamics.DynamicsExceptions import DomainError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='escape-atlas',
        description='Analytic safe-basin and critical-forcing prediction for the forced truncated quartic well')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='TOML run configuration')
    common.add_argument('--out', help='output directory (default: run.out, $ESCAPE_ATLAS_OUT, then ./out)')
    common.add_argument('--workers', type=int, help='number of worker threads')
    common.add_argument('--seed', type=int, help='seed of every random draw')
    common.add_argument('--verify', action='store_true', help='run the numeric verification as well')
    common.add_argument('--fast', action='store_true', help='500 EC horizon profile')
    common.add_argument('--verbose', action='store_true', help='log progress at INFO level')

    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('fcr-curve', parents=[common], help='critical forcing versus frequency')
    commands.add_parser('basin', parents=[common], help='safe basin in the initial-condition plane')
    commands.add_parser('strobe', parents=[common], help='stroboscopic portrait of non-escaping orbits')
    commands.add_parser('appendix', parents=[common], help='displacement versus energy escape criteria')
    commands.add_parser('selftest', parents=[common], help='special-function and conservation checks')

    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.fast:
        config = config.fast_profile()

    overrides = {}
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError('run.workers', 'expected at least 1')
        overrides['workers'] = args.workers
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError('run.seed', 'expected a nonnegative integer')
        overrides['seed'] = args.seed

    return config.with_run(**overrides) if overrides else config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        config = load_config(args)
        handler = CommandHandler(config, resolve_out_dir(args.out, config), verify=args.verify)
    except ConfigError as error:
        print(error, file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        match args.command:
            case 'fcr-curve':
                handler.cmd_fcr_curve()
            case 'basin':
                handler.cmd_basin()
            case 'strobe':
                handler.cmd_strobe()
            case 'appendix':
                handler.cmd_appendix()
            case 'selftest':
                return EXIT_OK if handler.cmd_selftest() else EXIT_FAILED
    except (ConfigError, DomainError) as error:
        print(error, file=sys.stderr)
        return EXIT_BAD_INPUT
    finally:
        handler.close()

    if not handler.registry.all_written:
        print(f'Missing artifacts: {", ".join(handler.registry.missing)}', file=sys.stderr)
        return EXIT_FAILED

    return EXIT_OK
