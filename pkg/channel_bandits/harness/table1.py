"""
The nine published comparison settings (four channels each, Q = I, R = 1) and the
command that re-runs them at desk scale next to the published regret values.
"""

import logging
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from channel_bandits import DEFAULT_HORIZON, DEFAULT_TRACE_CAP, write_csv
from channel_bandits.channels import ChannelBank
from channel_bandits.config_file_reader import ExperimentConfig
from channel_bandits.harness import simulate_policies, write_experiment_outputs
from channel_bandits.harness.manifest import ExperimentManifest
from channel_bandits.harness_logging import log_entry_exit
from channel_bandits.model import SystemModel
from channel_bandits.policies import LEARNING_KINDS, PolicyKind, PolicySpec
from channel_bandits.util import host_diagnostics

logger = logging.getLogger(__name__)

EPSILON_GRID_STEP = 0.02
DEFAULT_EPSILON_GRID = tuple(round(EPSILON_GRID_STEP * i, 2) for i in range(1, 50))
TABLE1_FILE_NAME = 'table1.csv'
TABLE1_COLUMNS = (
    'row',
    'theta_c',
    'epsilon',
    'policy',
    'published_regret',
    'measured_regret',
    'stderr',
    'relative_error',
    'diverged_runs',
)
TABLE1_POLICY_ORDER = ('epsilon_greedy', 'ts', 'obs', 'sbs')

SCALAR_A = [[1.45]]
COUPLED_A = [[1.2, 0.1], [0.2, 1.1]]
FAST_A = [[1.5, 0.2], [0.3, 0.9]]


@dataclass(frozen=True)
class Table1Row:
    index: int
    thetas: tuple
    A: list
    C: list
    epsilon: float
    # published regret at T = 1000 keyed by policy kind
    published: Dict[str, float]

    def model(self) -> SystemModel:
        n = len(self.A)
        return SystemModel(A=self.A, C=self.C, Q=np.eye(n), R=[[1.0]])

    def bank(self) -> ChannelBank:
        return ChannelBank.from_thetas(self.thetas)

    def policies(self, epsilon: Optional[float] = None) -> List[PolicySpec]:
        epsilon = epsilon or self.epsilon
        return [
            PolicySpec(kind, epsilon=epsilon if kind == PolicyKind.epsilon_greedy else None)
            for kind in LEARNING_KINDS
        ]

    def experiment(
        self,
        runs: int,
        seed: int,
        horizon: int = DEFAULT_HORIZON,
        epsilon: Optional[float] = None,
        cap: float = DEFAULT_TRACE_CAP,
    ) -> ExperimentConfig:
        return ExperimentConfig(
            model=self.model(),
            bank=self.bank(),
            policies=tuple(self.policies(epsilon)),
            horizon=horizon,
            runs=runs,
            seed=seed,
            trace_cap=cap,
        )


def _row(index, thetas, A, C, epsilon, eg, ts, obs, sbs) -> Table1Row:
    return Table1Row(
        index=index,
        thetas=thetas,
        A=A,
        C=C,
        epsilon=epsilon,
        published={'epsilon_greedy': eg, 'ts': ts, 'obs': obs, 'sbs': sbs},
    )


TABLE1_ROWS = (
    _row(1, (0.8, 0.75, 0.55, 0.5), SCALAR_A, [[1.0]], 0.12, 263, 143, 136, 135),
    _row(2, (0.7, 0.6, 0.5, 0.4), SCALAR_A, [[1.0]], 0.18, 996, 679, 596, 603),
    _row(3, (0.6, 0.5, 0.4, 0.3), SCALAR_A, [[1.0]], 0.22, 10319, 8253, 6823, 6276),
    _row(4, (0.7, 0.6, 0.4, 0.3), COUPLED_A, [[1.0, 1.0]], 0.10, 582, 295, 274, 273),
    _row(5, (0.65, 0.55, 0.45, 0.35), COUPLED_A, [[1.0, 1.0]], 0.12, 886, 517, 473, 483),
    _row(6, (0.55, 0.45, 0.35, 0.25), COUPLED_A, [[1.0, 1.0]], 0.18, 4723, 3424, 2727, 2430),
    _row(7, (0.9, 0.8, 0.7, 0.5), FAST_A, [[1.0, 1.0]], 0.14, 290, 104, 98, 97),
    _row(8, (0.8, 0.7, 0.6, 0.5), FAST_A, [[1.0, 1.0]], 0.18, 803, 403, 354, 363),
    _row(9, (0.7, 0.6, 0.5, 0.4), FAST_A, [[1.0, 1.0]], 0.22, 7185, 6178, 3903, 3106),
)


def table1_row(index: int) -> Table1Row:
    return TABLE1_ROWS[index - 1]


@dataclass
class EpsilonSearch:
    best_epsilon: float
    # epsilon -> regret at the horizon
    regrets: Dict[float, float]


def search_epsilon(
    config: ExperimentConfig,
    grid: Sequence[float] = DEFAULT_EPSILON_GRID,
    workers: int = 1,
    progress: bool = False,
) -> EpsilonSearch:
    """ε-greedy over `grid`; the smallest regret at the horizon wins, ties to the smaller ε."""
    if not grid:
        raise ValueError('epsilon grid is empty')
    policies = [PolicySpec(PolicyKind.epsilon_greedy, epsilon=eps) for eps in grid]
    result = simulate_policies(config, policies, workers=workers, progress=progress)
    regrets = {spec.epsilon: result.reports[spec.label].regret_T for spec in policies}
    best = min(regrets, key=lambda eps: (regrets[eps], eps))
    logger.info(f'Best epsilon over {len(grid)} grid points: {best} (regret {regrets[best]:.4g})')
    return EpsilonSearch(best_epsilon=best, regrets=regrets)


def _relative_error(measured: float, published: float) -> float:
    return (measured - published) / published


@log_entry_exit(logger)
def cmd_table1(
    rows: Sequence[int],
    runs: int,
    seed: int,
    outdir: str,
    workers: int = 1,
    progress: bool = False,
    search: bool = False,
    horizon: int = DEFAULT_HORIZON,
) -> str:
    """
    Re-run the selected rows with all four learning policies and write table1.csv with
    the published regret next to the measured one. Each row's full per-policy output
    goes to row_<n>/.
    """
    start = time.perf_counter()
    table = []
    files = []
    chosen_epsilons = {}
    for index in rows:
        row = table1_row(index)
        epsilon = row.epsilon
        if search:
            searched = search_epsilon(
                row.experiment(runs, seed, horizon), workers=workers, progress=progress
            )
            epsilon = searched.best_epsilon
        chosen_epsilons[index] = epsilon

        logger.info(f'Table row {index}: thetas={row.thetas}, epsilon={epsilon}, runs={runs}')
        experiment = row.experiment(runs, seed, horizon, epsilon=epsilon)
        result = simulate_policies(
            experiment,
            experiment.policies,
            workers=workers,
            progress=progress,
        )
        row_dir = os.path.join(outdir, f'row_{index}')
        os.makedirs(row_dir, exist_ok=True)
        files.extend(write_experiment_outputs(result, row_dir))

        by_kind = {spec.kind.value: label for label, spec in result.specs.items()}
        for kind in TABLE1_POLICY_ORDER:
            report = result.reports[by_kind[kind]]
            table.append(
                (
                    index,
                    result.steady.theta_c,
                    epsilon,
                    kind,
                    row.published[kind],
                    report.regret_T,
                    report.stderr_T,
                    _relative_error(report.regret_T, row.published[kind]),
                    report.diverged_runs,
                )
            )

    path = write_csv(outdir, TABLE1_FILE_NAME, TABLE1_COLUMNS, table)
    ExperimentManifest(
        command='table1',
        master_seed=seed,
        workers=workers,
        parameters={
            'rows': list(rows),
            'runs': runs,
            'horizon': horizon,
            'search_epsilon': search,
            'epsilons': chosen_epsilons,
        },
        files=[path, *files],
        host=host_diagnostics(),
        wall_clock_seconds=round(time.perf_counter() - start, 3),
    ).to_local_file(outdir)
    return path
