"""
Seeded Monte Carlo experiments over the closed loop

    select channel -> draw γ -> update posterior -> update remote covariance

Runs are split into fixed-size chunks. Each chunk folds its RunRecords into a
RegretAccumulator, and the chunk partials are merged in chunk order, so the output does
not depend on how many worker processes ran the chunks.
"""

import logging
import time
from concurrent.futures import Executor, ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from channel_bandits import DEFAULT_TRACE_CAP, RUN_CHUNK_SIZE
from channel_bandits.channels import ChannelBank, draw, is_stabilizable
from channel_bandits.config_file_reader import ExperimentConfig, require_trace_cap
from channel_bandits.estimator import CovarianceLadder
from channel_bandits.exception import StabilizabilityError
from channel_bandits.harness.manifest import ExperimentManifest
from channel_bandits.harness.output import (
    summary_row,
    write_policy_csv,
    write_summary_csv,
    write_usage_csv,
)
from channel_bandits.harness.seeding import RunPlan, make_streams
from channel_bandits.harness_logging import log_entry_exit, log_standard_error
from channel_bandits.model import SteadyState, SystemModel, steady_state
from channel_bandits.policies import ChannelSelector, PolicySpec, PosteriorState
from channel_bandits.regret import (
    RegretAccumulator,
    RegretReport,
    RunRecord,
    ScalingFit,
    oracle_trace_series,
    scaling_fit,
)
from channel_bandits.util import batched, host_diagnostics

logger = logging.getLogger(__name__)


def run_single(
    model: SystemModel,
    steady: SteadyState,
    bank: ChannelBank,
    policy: Union[PolicySpec, ChannelSelector],
    T: int,
    seed: int,
    cap: float = DEFAULT_TRACE_CAP,
    ladder: Optional[CovarianceLadder] = None,
) -> RunRecord:
    """
    One closed-loop run of T steps seeded from a single stream seed.

    Divergence (a loss streak long enough to push tr P_k past the cap) is reported
    through RunRecord.diverged; the trace is held at the cap.
    """
    if T < 1:
        raise ValueError('T must be at least 1')
    if isinstance(policy, PolicySpec):
        policy = ChannelSelector(policy.with_theta_c_hat(steady.theta_c), bank)
    if ladder is None:
        ladder = CovarianceLadder(model, steady, T, cap)

    channel_rng, policy_rng = make_streams(seed)
    state = PosteriorState.fresh(bank.M)
    selections = np.empty(T, dtype=np.int64)
    gammas = np.empty(T, dtype=np.int8)
    traces = np.empty(T)

    # losses since the last reception; P_k = h^age(P̄)
    age = 0
    diverged = False
    for k in range(T):
        m = policy.select(state, policy_rng)
        gamma = draw(bank, m, channel_rng)
        state.update(m, gamma)
        age = 0 if gamma else age + 1

        selections[k] = m
        gammas[k] = gamma
        traces[k] = ladder.traces[age]
        diverged = diverged or ladder.is_saturated(age)

    return RunRecord(selections=selections, gammas=gammas, traces=traces, diverged=diverged)


@dataclass(frozen=True, eq=False)
class ChunkTask:
    model: SystemModel
    steady: SteadyState
    bank: ChannelBank
    spec: PolicySpec
    T: int
    cap: float
    plan: RunPlan
    oracle: np.ndarray
    run_indices: tuple


def _run_chunk(task: ChunkTask) -> RegretAccumulator:
    selector = ChannelSelector(task.spec, task.bank)
    ladder = CovarianceLadder(task.model, task.steady, task.T, task.cap)
    accumulator = RegretAccumulator(task.oracle, task.bank)
    for run_index in task.run_indices:
        accumulator.add(
            run_single(
                task.model,
                task.steady,
                task.bank,
                selector,
                task.T,
                task.plan.seed_for(run_index),
                cap=task.cap,
                ladder=ladder,
            )
        )
    return accumulator


def _log_chunk_done(desc: str, done: int, total: int) -> None:
    logger.info(f'{desc}: {done}/{total} runs done', extra={'file_only': True})


def _collect_chunks(
    tasks: List[ChunkTask], executor: Optional[Executor], desc: str, progress: bool
) -> List[RegretAccumulator]:
    total = sum(len(task.run_indices) for task in tasks)
    done = 0
    with tqdm(total=total, desc=desc, unit='runs', disable=not progress, leave=False) as bar:
        if executor is None:
            partials = []
            for task in tasks:
                partials.append(_run_chunk(task))
                done += len(task.run_indices)
                bar.update(len(task.run_indices))
                _log_chunk_done(desc, done, total)
            return partials

        futures = [executor.submit(_run_chunk, task) for task in tasks]
        sizes = {future: len(task.run_indices) for future, task in zip(futures, tasks)}
        for future in as_completed(futures):
            done += sizes[future]
            bar.update(sizes[future])
            _log_chunk_done(desc, done, total)
        # chunk order, not completion order
        return [future.result() for future in futures]


def run_policy(
    model: SystemModel,
    steady: SteadyState,
    bank: ChannelBank,
    spec: PolicySpec,
    T: int,
    runs: int,
    plan: RunPlan,
    oracle: np.ndarray,
    cap: float = DEFAULT_TRACE_CAP,
    executor: Optional[Executor] = None,
    progress: bool = False,
    desc: Optional[str] = None,
) -> RegretReport:
    if runs < 1:
        raise ValueError('runs must be at least 1')
    spec = spec.with_theta_c_hat(steady.theta_c)
    tasks = [
        ChunkTask(model, steady, bank, spec, T, cap, plan, oracle, run_indices)
        for run_indices in batched(range(runs), RUN_CHUNK_SIZE)
    ]
    partials = _collect_chunks(tasks, executor, desc or spec.label, progress)

    total = partials[0]
    for partial in partials[1:]:
        total.merge(partial)
    logger.debug(f'{spec.label}: folded {total.runs} runs from {len(partials)} chunks')
    return total.report()


class WorkerPool:
    """A process pool for workers > 1, nothing otherwise; results are identical either way."""

    def __init__(self, workers: int):
        self.workers = workers
        self.executor: Optional[Executor] = None

    def __enter__(self) -> Optional[Executor]:
        if self.workers > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.workers)
        return self.executor

    def __exit__(self, *exc_info):
        if self.executor is not None:
            self.executor.shutdown()
        return False


def classify_scaling(report: RegretReport) -> Optional[ScalingFit]:
    try:
        return scaling_fit(report.cum_regret, stderr=report.stderr_regret)
    except ValueError as e:
        logger.debug(f'No scaling classification for horizon {report.horizon}: {e}')
        return None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    steady: SteadyState
    oracle: np.ndarray
    # label -> resolved spec / report / fit, in config order
    specs: Dict[str, PolicySpec] = field(default_factory=dict)
    reports: Dict[str, RegretReport] = field(default_factory=dict)
    fits: Dict[str, Optional[ScalingFit]] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    def summary_rows(self) -> List[tuple]:
        return [
            summary_row(label, self.specs[label], report, self.fits[label])
            for label, report in self.reports.items()
        ]


def require_stabilizable(bank: ChannelBank, steady: SteadyState) -> None:
    if not is_stabilizable(bank, steady.theta_c):
        log_standard_error(logging.ERROR, 4002, [bank.theta_star, steady.theta_c], logger)
        raise StabilizabilityError(
            f'theta*={bank.theta_star} does not exceed theta_c={steady.theta_c}'
        )


def simulate_policies(
    config: ExperimentConfig,
    policies: Sequence[PolicySpec],
    workers: int = 1,
    progress: bool = False,
    steady: Optional[SteadyState] = None,
) -> ExperimentResult:
    """Run every policy of `policies` under `config`; the ordinal of a policy is its position."""
    steady = steady or steady_state(config.model)
    require_trace_cap(config, steady)
    require_stabilizable(config.bank, steady)
    oracle = oracle_trace_series(
        config.model, config.bank.theta_star, config.horizon, steady=steady, cap=config.trace_cap
    )
    result = ExperimentResult(config=config, steady=steady, oracle=oracle)

    with WorkerPool(workers) as executor:
        for ordinal, spec in enumerate(policies):
            label = spec.label
            report = run_policy(
                config.model,
                steady,
                config.bank,
                spec,
                config.horizon,
                config.runs,
                RunPlan(config.seed, ordinal),
                oracle,
                cap=config.trace_cap,
                executor=executor,
                progress=progress,
                desc=label,
            )
            if report.diverged_runs:
                log_standard_error(
                    logging.WARNING,
                    4001,
                    [report.diverged_runs, report.runs, label, config.trace_cap],
                    logger,
                )
            result.specs[label] = spec.with_theta_c_hat(steady.theta_c)
            result.reports[label] = report
            result.fits[label] = classify_scaling(report)
            logger.info(
                f'{label}: regret({config.horizon}) = {report.regret_T:.4g} '
                f'± {report.stderr_T:.2g} over {report.runs} runs'
            )
    return result


def write_experiment_outputs(result: ExperimentResult, outdir: str) -> List[str]:
    files = []
    for label, report in result.reports.items():
        files.append(write_policy_csv(outdir, label, report))
        files.append(write_usage_csv(outdir, label, report))
    files.append(write_summary_csv(outdir, result.summary_rows()))
    result.files.extend(files)
    return files


@log_entry_exit(logger)
def run_experiment(
    config: ExperimentConfig,
    outdir: Optional[str] = None,
    workers: int = 1,
    progress: bool = False,
) -> ExperimentResult:
    """
    Simulate every configured policy, then (when `outdir` is given) write one CSV per
    policy, a usage CSV per policy, summary.csv and manifest.json.
    """
    start = time.perf_counter()
    result = simulate_policies(config, config.policies, workers=workers, progress=progress)
    if outdir:
        write_experiment_outputs(result, outdir)
        manifest = ExperimentManifest(
            command='run',
            master_seed=config.seed,
            workers=workers,
            config=config.to_dict(),
            policies={spec.label: ordinal for ordinal, spec in enumerate(config.policies)},
            files=list(result.files),
            host=host_diagnostics(),
            wall_clock_seconds=round(time.perf_counter() - start, 3),
        )
        manifest.to_local_file(outdir)
    return result
