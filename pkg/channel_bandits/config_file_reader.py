import json
import logging
import os
from collections import namedtuple
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import yaml

from channel_bandits import (
    DEFAULT_HORIZON,
    DEFAULT_RUNS,
    DEFAULT_SEED,
    DEFAULT_TRACE_CAP,
    FULL_SCALE_RUNS,
    VALID_COMMANDS,
)
from channel_bandits.channels import ChannelBank
from channel_bandits.exception import (
    BadConfigException,
    DimensionError,
    InvalidChannelBankError,
    InvalidModelError,
    OutputWriteException,
    PolicyConfigurationError,
)
from channel_bandits.harness_logging import log_standard_error
from channel_bandits.model import SteadyState, SystemModel
from channel_bandits.policies import PolicyKind, PolicySpec
from channel_bandits.util import default_worker_count

logger = logging.getLogger(__name__)

EXPERIMENT_KEYS = (
    'model',
    'thetas',
    'policies',
    'horizon',
    'runs',
    'seed',
    'trace_cap',
    'output_path',
)
REQUIRED_EXPERIMENT_KEYS = ('model', 'thetas', 'policies')
MODEL_KEYS = ('A', 'C', 'Q', 'R')
POLICY_KEYS = ('kind', 'epsilon', 'theta_c_hat', 'fixed_channel')
DEFAULT_OUTPUT_PATH = './output'
MIN_TABLE1_RUNS = 1000
TABLE1_ROW_COUNT = 9
MAX_SEED = 2**64 - 1


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: SystemModel
    bank: ChannelBank
    policies: Tuple
    horizon: int = DEFAULT_HORIZON
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    trace_cap: float = DEFAULT_TRACE_CAP
    output_path: str = DEFAULT_OUTPUT_PATH

    @property
    def thetas(self) -> list:
        return self.bank.to_list()

    def to_dict(self) -> dict:
        return {
            'model': self.model.to_dict(),
            'thetas': self.bank.to_list(),
            'policies': [policy.to_dict() for policy in self.policies],
            'horizon': self.horizon,
            'runs': self.runs,
            'seed': self.seed,
            'trace_cap': self.trace_cap,
            'output_path': self.output_path,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()


ValidatedConfig = namedtuple(
    'ValidatedConfig',
    [
        'command',
        'experiment',
        'seed',
        'outdir',
        'workers',
        'verbose',
        'progress',
        'table1_rows',
        'table1_runs',
        'table1_horizon',
        'search_epsilon',
        'epsilons',
        'horizons',
    ],
)


def _reject_unknown_keys(doc: dict, allowed: tuple, path: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        field = f'{path}.{unknown[0]}' if path else unknown[0]
        log_standard_error(logging.ERROR, 2001, [field, 'unknown key'], logger)
        raise BadConfigException(f'unknown key (allowed: {", ".join(allowed)})', field=field)


def _require_int(doc: dict, key: str, default: int, minimum: int, maximum: Optional[int] = None):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadConfigException(f'must be an integer, got {value!r}', field=key)
    if value < minimum or (maximum is not None and value > maximum):
        raise BadConfigException(f'must lie in [{minimum}, {maximum or "inf"}]', field=key)
    return value


def _parse_model(doc) -> SystemModel:
    if not isinstance(doc, dict):
        raise BadConfigException('must be an object with keys A, C, Q, R', field='model')
    _reject_unknown_keys(doc, MODEL_KEYS, 'model')
    for key in MODEL_KEYS:
        if key not in doc:
            raise BadConfigException('missing matrix', field=f'model.{key}')
    try:
        return SystemModel(A=doc['A'], C=doc['C'], Q=doc['Q'], R=doc['R'])
    except (DimensionError, InvalidModelError, ValueError, TypeError) as e:
        raise BadConfigException(str(e), field='model')


def _parse_policy(doc, index: int, bank: ChannelBank):
    path = f'policies[{index}]'
    if isinstance(doc, str):
        doc = {'kind': doc}
    if not isinstance(doc, dict):
        raise BadConfigException('must be an object or a kind string', field=path)
    _reject_unknown_keys(doc, POLICY_KEYS, path)
    if 'kind' not in doc:
        raise BadConfigException('missing kind', field=f'{path}.kind')
    try:
        spec = PolicySpec(
            kind=doc['kind'],
            epsilon=doc.get('epsilon'),
            theta_c_hat=doc.get('theta_c_hat'),
            fixed_channel=doc.get('fixed_channel'),
        )
    except (PolicyConfigurationError, TypeError) as e:
        raise BadConfigException(str(e), field=path)
    if spec.fixed_channel is not None and spec.fixed_channel >= bank.M:
        raise BadConfigException(
            f'fixed_channel must be below {bank.M}', field=f'{path}.fixed_channel'
        )
    return spec


def parse_experiment_config(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise BadConfigException('config document must be an object')
    _reject_unknown_keys(doc, EXPERIMENT_KEYS, '')
    for key in REQUIRED_EXPERIMENT_KEYS:
        if key not in doc:
            raise BadConfigException('missing required key', field=key)

    model = _parse_model(doc['model'])

    thetas = doc['thetas']
    if not isinstance(thetas, list) or not all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in thetas
    ):
        raise BadConfigException('must be an array of numbers', field='thetas')
    try:
        bank = ChannelBank.from_thetas(thetas)
    except InvalidChannelBankError as e:
        raise BadConfigException(str(e), field='thetas')

    policies_doc = doc['policies']
    if not isinstance(policies_doc, list) or not policies_doc:
        raise BadConfigException('must be a non-empty array', field='policies')
    policies = tuple(_parse_policy(p, i, bank) for i, p in enumerate(policies_doc))
    labels = [policy.label for policy in policies]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise BadConfigException(f'duplicate policies: {", ".join(duplicates)}', field='policies')

    trace_cap = doc.get('trace_cap', DEFAULT_TRACE_CAP)
    if isinstance(trace_cap, bool) or not isinstance(trace_cap, (int, float)) or trace_cap <= 0:
        raise BadConfigException('must be a positive number', field='trace_cap')

    output_path = doc.get('output_path', DEFAULT_OUTPUT_PATH)
    if not isinstance(output_path, str) or not output_path:
        raise BadConfigException('must be a non-empty string', field='output_path')

    return ExperimentConfig(
        model=model,
        bank=bank,
        policies=policies,
        horizon=_require_int(doc, 'horizon', DEFAULT_HORIZON, 1),
        runs=_require_int(doc, 'runs', DEFAULT_RUNS, 1),
        seed=_require_int(doc, 'seed', DEFAULT_SEED, 0, MAX_SEED),
        trace_cap=float(trace_cap),
        output_path=output_path,
    )


def require_trace_cap(config: ExperimentConfig, steady: SteadyState) -> None:
    """The cap has to sit above tr(P̄), which is only known once the Riccati fixed point is."""
    if config.trace_cap <= steady.trace:
        log_standard_error(
            logging.ERROR, 2001, ['trace_cap', f'must exceed tr(Pbar) = {steady.trace:.6g}'], logger
        )
        raise BadConfigException(
            f'{config.trace_cap:g} must exceed tr(Pbar) = {steady.trace:.6g}', field='trace_cap'
        )


def load_config_document(config_file_path: str):
    try:
        with open(config_file_path, 'r') as config_file:
            text = config_file.read()
    except FileNotFoundError:
        log_standard_error(logging.ERROR, 2002, [config_file_path], logger)
        raise BadConfigException(f'Config file not found at "{config_file_path}"')

    # JSON first: PyYAML reads exponent floats like 1e12 as strings
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        log_standard_error(logging.ERROR, 2003, [config_file_path, e], logger)
        raise BadConfigException(f'Config file "{config_file_path}" could not be parsed', exc=e)


def read_experiment_config(config_file_path: str) -> ExperimentConfig:
    return parse_experiment_config(load_config_document(config_file_path))


def dump_experiment_config(config: ExperimentConfig, path: str) -> None:
    with open(path, 'w') as outfile:
        outfile.write(json.dumps(config.to_dict(), indent=2))
        outfile.write('\n')


def parse_int_list(text: str, name: str) -> List[int]:
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise BadConfigException(
            f'expected a comma-separated list of integers, got "{text}"', field=name
        )


def parse_float_list(text: str, name: str) -> List[float]:
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise BadConfigException(
            f'expected a comma-separated list of numbers, got "{text}"', field=name
        )


def ensure_output_dir(outdir: str) -> str:
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as e:
        log_standard_error(logging.ERROR, 3001, [outdir, e], logger)
        raise OutputWriteException(f"Couldn't create output dir {outdir}", path=outdir)
    if not os.access(outdir, os.W_OK):
        log_standard_error(logging.ERROR, 3001, [outdir, 'permission denied'], logger)
        raise OutputWriteException(f'Output dir {outdir} is not writable', path=outdir)
    return outdir


def obtain_config(args) -> ValidatedConfig:
    command = args.command
    if command not in VALID_COMMANDS:
        raise BadConfigException(f'command should be one of {", ".join(VALID_COMMANDS)}')

    if args.seed is not None and not 0 <= args.seed <= MAX_SEED:
        raise BadConfigException('must be a 64-bit unsigned integer', field='--seed')

    experiment = None
    if command != 'table1':
        experiment = read_experiment_config(args.config_file)
        if args.seed is not None:
            experiment = replace(experiment, seed=args.seed)
        if getattr(args, 'runs', None) is not None:
            if args.runs < 1:
                raise BadConfigException('must be at least 1', field='--runs')
            experiment = replace(experiment, runs=args.runs)

    workers = args.workers if args.workers is not None else default_worker_count()
    if workers < 1:
        raise BadConfigException('must be at least 1', field='--workers')

    table1_rows, table1_runs = None, None
    if command == 'table1':
        table1_rows = (
            parse_int_list(args.rows, '--rows')
            if args.rows
            else list(range(1, TABLE1_ROW_COUNT + 1))
        )
        bad_rows = [row for row in table1_rows if not 1 <= row <= TABLE1_ROW_COUNT]
        if bad_rows or not table1_rows:
            raise BadConfigException(f'rows must lie in 1..{TABLE1_ROW_COUNT}', field='--rows')
        table1_runs = DEFAULT_RUNS if args.runs is None else args.runs
        if args.full_scale:
            table1_runs = FULL_SCALE_RUNS
        if table1_runs < MIN_TABLE1_RUNS:
            raise BadConfigException(f'must be at least {MIN_TABLE1_RUNS}', field='--runs')
        if args.horizon < 1:
            raise BadConfigException('must be at least 1', field='--horizon')

    epsilons = None
    if command == 'epsilon-sweep':
        epsilons = parse_float_list(args.epsilons, '--epsilons')
        if not epsilons or not all(0.0 < eps < 1.0 for eps in epsilons):
            raise BadConfigException('every epsilon must lie in (0, 1)', field='--epsilons')
        # reports are keyed by label, so two epsilons must not print the same
        labels = [PolicySpec(PolicyKind.epsilon_greedy, epsilon=eps).label for eps in epsilons]
        if len(set(labels)) != len(labels):
            raise BadConfigException(
                'epsilons must be distinct to 6 significant digits', field='--epsilons'
            )

    horizons = None
    if command == 'scaling':
        horizons = parse_int_list(args.horizons, '--horizons')
        increasing = all(b > a for a, b in zip(horizons, horizons[1:]))
        if not horizons or horizons[0] < 1 or not increasing:
            raise BadConfigException(
                'horizons must be positive and increasing', field='--horizons'
            )

    if experiment is not None:
        seed = experiment.seed
    else:
        seed = DEFAULT_SEED if args.seed is None else args.seed

    outdir = None
    if command != 'validate':
        if args.out:
            outdir = args.out
        elif experiment is not None:
            outdir = experiment.output_path
        else:
            outdir = os.path.join(DEFAULT_OUTPUT_PATH, 'table1')
        ensure_output_dir(outdir)

    return ValidatedConfig(
        command=command,
        experiment=experiment,
        seed=seed,
        outdir=outdir,
        workers=workers,
        verbose=args.verbose,
        progress=not args.no_progress,
        table1_rows=table1_rows,
        table1_runs=table1_runs,
        table1_horizon=getattr(args, 'horizon', None),
        search_epsilon=getattr(args, 'search_epsilon', False),
        epsilons=epsilons,
        horizons=horizons,
    )
