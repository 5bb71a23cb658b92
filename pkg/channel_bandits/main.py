import argparse
import logging
import sys
from typing import Optional, Sequence

from channel_bandits import DEFAULT_HORIZON, harness_logging
from channel_bandits.config_file_reader import ValidatedConfig, obtain_config
from channel_bandits.exception import (
    BadConfigException,
    DimensionError,
    InvalidChannelBankError,
    InvalidModelError,
    OutputWriteException,
    PolicyConfigurationError,
    StabilizabilityError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_BAD_CONFIG = 2
EXIT_OUTPUT = 3

# numerical validation failures while building or checking a config
CONFIG_ERRORS = (
    BadConfigException,
    DimensionError,
    InvalidModelError,
    InvalidChannelBankError,
    PolicyConfigurationError,
    StabilizabilityError,
)


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--seed',
        type=int,
        default=None,
        help='Master seed; overrides the seed in the config file',
    )
    parser.add_argument(
        '--out',
        default=None,
        help='Output directory (default: output_path from the config, or ./output/table1)',
    )
    parser.add_argument(
        '--runs',
        type=int,
        default=None,
        help='Monte Carlo runs per policy; overrides the config file',
    )
    parser.add_argument(
        '-w',
        '--workers',
        type=int,
        default=None,
        help='Worker processes (default: number of physical cores). Results do not depend on it',
    )
    parser.add_argument(
        '-v', '--verbose', action='store_true', help='Log DEBUG messages to the console'
    )
    parser.add_argument(
        '--no-progress', action='store_true', help='Disable the tqdm progress bars'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='channel-bandits',
        description=(
            'Monte Carlo experiments for bandit channel selection in remote state estimation'
        ),
    )
    subparsers = parser.add_subparsers(dest='command', metavar='command', required=True)

    run = subparsers.add_parser('run', help='Run every policy in a config file')
    run.add_argument('config_file', help='Path to a JSON experiment config')
    _add_common_arguments(run)

    table1 = subparsers.add_parser(
        'table1', help='Re-run the published comparison table at desk scale'
    )
    table1.add_argument('--rows', default=None, help='Comma-separated rows 1..9 (default: all)')
    table1.add_argument(
        '--search-epsilon',
        action='store_true',
        help='Pick epsilon by grid search (step 0.02) instead of the published value',
    )
    table1.add_argument(
        '--full-scale', action='store_true', help='Use the published run count (100000)'
    )
    table1.add_argument(
        '--horizon', type=int, default=DEFAULT_HORIZON, help='Horizon T (default: 1000)'
    )
    _add_common_arguments(table1)

    sweep = subparsers.add_parser(
        'epsilon-sweep', help='Compare epsilon-greedy stability, simulated and analytic'
    )
    sweep.add_argument('config_file', help='Path to a JSON experiment config')
    sweep.add_argument('--epsilons', required=True, help='Comma-separated epsilons in (0, 1)')
    _add_common_arguments(sweep)

    scaling = subparsers.add_parser(
        'scaling', help='Cumulative regret at several horizons and its growth class'
    )
    scaling.add_argument('config_file', help='Path to a JSON experiment config')
    scaling.add_argument('--horizons', required=True, help='Comma-separated increasing horizons')
    _add_common_arguments(scaling)

    validate = subparsers.add_parser(
        'validate', help='Check a config and print its stability figures'
    )
    validate.add_argument('config_file', help='Path to a JSON experiment config')
    _add_common_arguments(validate)
    return parser


def dispatch(config: ValidatedConfig) -> list:
    """Run the command; returns one status dict per simulated policy."""
    # imported here so `--help` does not pay for numpy/scipy start-up
    from channel_bandits.harness import run_experiment
    from channel_bandits.harness.sweeps import cmd_epsilon_sweep, cmd_scaling
    from channel_bandits.harness.table1 import cmd_table1
    from channel_bandits.harness.validate import cmd_validate

    experiment = config.experiment
    if config.command == 'run':
        result = run_experiment(
            experiment, config.outdir, workers=config.workers, progress=config.progress
        )
        for row in result.summary_rows():
            print(', '.join(str(cell) for cell in row))
        return [
            {'policy': label, 'status': 'diverged' if report.diverged_runs else 'success'}
            for label, report in result.reports.items()
        ]
    elif config.command == 'table1':
        cmd_table1(
            config.table1_rows,
            config.table1_runs,
            config.seed,
            config.outdir,
            workers=config.workers,
            progress=config.progress,
            search=config.search_epsilon,
            horizon=config.table1_horizon,
        )
    elif config.command == 'epsilon-sweep':
        cmd_epsilon_sweep(
            experiment,
            config.epsilons,
            config.outdir,
            workers=config.workers,
            progress=config.progress,
        )
    elif config.command == 'scaling':
        cmd_scaling(
            experiment,
            config.horizons,
            config.outdir,
            workers=config.workers,
            progress=config.progress,
        )
    elif config.command == 'validate':
        cmd_validate(experiment)
    return []


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # console-only logging until the output directory is known
    logging_config = harness_logging.configure(None, verbose=args.verbose)
    try:
        config = obtain_config(args)
    except CONFIG_ERRORS as e:
        logger.error(f'ERROR: Bad config; {e}')
        harness_logging.close_out(logging_config)
        return EXIT_BAD_CONFIG
    except (OutputWriteException, OSError) as e:
        logger.error(f'ERROR: Could not prepare output directory; {e}')
        harness_logging.close_out(logging_config)
        return EXIT_OUTPUT

    logging_config = harness_logging.configure(config.outdir, verbose=config.verbose)
    harness_logging.bind_default_harness_context(config.command, config.seed)
    if config.outdir:
        logger.info(f'Will write output files into {config.outdir}')

    exit_code = EXIT_OK
    statuses = []
    try:
        statuses = dispatch(config)
    except CONFIG_ERRORS as e:
        logger.error(f'ERROR: Bad config; {e}')
        exit_code = EXIT_BAD_CONFIG
    except (OutputWriteException, OSError) as e:
        harness_logging.log_standard_error(logging.ERROR, 3001, [config.outdir, e], logger)
        exit_code = EXIT_OUTPUT
    except Exception as e:
        logger.exception(f'Encountered error during harness run! {e}')
        exit_code = EXIT_UNEXPECTED

    if exit_code != EXIT_OK:
        statuses.append({'policy': config.command, 'status': 'failed'})
    log_extras_status_dict = harness_logging.generate_logging_extras_dict_for_done_message(
        statuses
    )
    logger.info('Done!', extra=log_extras_status_dict)
    harness_logging.close_out(logging_config)
    return exit_code


def cli() -> None:
    sys.exit(main())


if __name__ == '__main__':
    cli()
