"""
Estimation regret and the bandit bookkeeping around it.

    regret^E(T) = Σ_{k≤T} tr(E[P_k] - E[P_k*])

E[P_k*] (the oracle that always uses the best channel) comes from the deterministic
expected-covariance recursion; E[P_k] under a learning policy is a Monte Carlo mean.
Runs are folded one at a time into a RegretAccumulator so memory does not grow with the
number of runs.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from channel_bandits import DEFAULT_TRACE_CAP
from channel_bandits.channels import ChannelBank
from channel_bandits.estimator import expected_series
from channel_bandits.exception import StabilizabilityError
from channel_bandits.model import SteadyState, SystemModel, steady_state

logger = logging.getLogger(__name__)

INDETERMINATE_RSS_BAND = (0.8, 1.25)


@dataclass(frozen=True, eq=False)
class RunRecord:
    selections: np.ndarray
    gammas: np.ndarray
    traces: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        T = len(self.selections)
        if len(self.gammas) != T or len(self.traces) != T:
            raise ValueError('selections, gammas and traces must have the same length')

    @property
    def horizon(self) -> int:
        return len(self.selections)


@dataclass(frozen=True, eq=False)
class RegretReport:
    mean_trace: np.ndarray
    oracle_trace: np.ndarray
    cum_regret: np.ndarray
    n_sub: np.ndarray
    classical_regret: np.ndarray
    runs: int
    stderr_regret: np.ndarray
    diverged_runs: int = 0
    # share of runs using each channel at each step, shape (M, T)
    usage: Optional[np.ndarray] = field(default=None, repr=False)
    # mean γ over the second half of the horizon
    reception_rate: float = math.nan

    @property
    def horizon(self) -> int:
        return len(self.mean_trace)

    @property
    def regret_T(self) -> float:
        return float(self.cum_regret[-1])

    @property
    def stderr_T(self) -> float:
        return float(self.stderr_regret[-1])

    @property
    def n_sub_T(self) -> float:
        return float(self.n_sub[-1])

    @property
    def diverged_fraction(self) -> float:
        return self.diverged_runs / self.runs

    def prefix(self, T: int) -> 'RegretReport':
        """The same report truncated to the first T steps."""
        return RegretReport(
            mean_trace=self.mean_trace[:T],
            oracle_trace=self.oracle_trace[:T],
            cum_regret=self.cum_regret[:T],
            n_sub=self.n_sub[:T],
            classical_regret=self.classical_regret[:T],
            runs=self.runs,
            stderr_regret=self.stderr_regret[:T],
            diverged_runs=self.diverged_runs,
            usage=None if self.usage is None else self.usage[:, :T],
            reception_rate=self.reception_rate,
        )


def oracle_trace_series(
    model: SystemModel,
    theta_star: float,
    T: int,
    steady: Optional[SteadyState] = None,
    cap: float = DEFAULT_TRACE_CAP,
) -> np.ndarray:
    """tr E[P_k*] for k = 1..T when the best channel is used at every step."""
    steady = steady or steady_state(model)
    if not theta_star > steady.theta_c:
        raise StabilizabilityError(
            f'theta*={theta_star} does not exceed theta_c={steady.theta_c}; '
            'the oracle covariance diverges'
        )
    return expected_series(model, theta_star, T, cap=cap, steady=steady).traces


def count_suboptimal(selections: Sequence[int], m_star: int) -> np.ndarray:
    """N_sub(k): number of steps j ≤ k that used a channel other than m*."""
    return np.cumsum(np.asarray(selections) != m_star)


def classical_regret(selections: Sequence[int], bank: ChannelBank) -> np.ndarray:
    """Cumulative Σ (θ* - θ_{m_k}) along one run."""
    return np.cumsum(bank.theta_star - bank.thetas[np.asarray(selections)])


class RegretAccumulator:
    """
    Running sums over RunRecords for one policy.

    add() must see records in run-index order and merge() must combine accumulators in
    chunk order; with a fixed chunk size the resulting floats do not depend on how the
    chunks were spread over workers.
    """

    def __init__(self, oracle: np.ndarray, bank: ChannelBank):
        T = len(oracle)
        self.oracle = np.asarray(oracle, dtype=float)
        self.bank = bank
        self.runs = 0
        self.diverged_runs = 0
        self.sum_traces = np.zeros(T)
        self.sum_gap = np.zeros(T)
        self.sumsq_gap = np.zeros(T)
        self.sum_n_sub = np.zeros(T)
        self.sum_classical = np.zeros(T)
        self.usage_counts = np.zeros((bank.M, T), dtype=np.int64)
        self.late_receptions = 0
        self.late_steps = 0

    @property
    def horizon(self) -> int:
        return len(self.oracle)

    def add(self, record: RunRecord) -> 'RegretAccumulator':
        if record.horizon != self.horizon:
            raise ValueError(
                f'record horizon {record.horizon} does not match oracle length {self.horizon}'
            )
        traces = np.asarray(record.traces, dtype=float)
        selections = np.asarray(record.selections)
        gap = np.cumsum(traces - self.oracle)

        self.runs += 1
        self.diverged_runs += int(record.diverged)
        self.sum_traces += traces
        self.sum_gap += gap
        self.sumsq_gap += gap * gap
        self.sum_n_sub += count_suboptimal(selections, self.bank.m_star)
        self.sum_classical += classical_regret(selections, self.bank)
        np.add.at(self.usage_counts, (selections, np.arange(self.horizon)), 1)

        late = np.asarray(record.gammas)[self.horizon // 2 :]
        self.late_receptions += int(np.sum(late))
        self.late_steps += late.size
        return self

    def merge(self, other: 'RegretAccumulator') -> 'RegretAccumulator':
        if other.horizon != self.horizon:
            raise ValueError('cannot merge accumulators with different horizons')
        self.runs += other.runs
        self.diverged_runs += other.diverged_runs
        self.sum_traces += other.sum_traces
        self.sum_gap += other.sum_gap
        self.sumsq_gap += other.sumsq_gap
        self.sum_n_sub += other.sum_n_sub
        self.sum_classical += other.sum_classical
        self.usage_counts += other.usage_counts
        self.late_receptions += other.late_receptions
        self.late_steps += other.late_steps
        return self

    def report(self) -> RegretReport:
        if self.runs == 0:
            raise ValueError('no run records to aggregate')
        runs = self.runs
        mean_trace = self.sum_traces / runs
        if runs > 1:
            variance = (self.sumsq_gap - self.sum_gap**2 / runs) / (runs - 1)
            stderr = np.sqrt(np.clip(variance, 0.0, None) / runs)
        else:
            stderr = np.zeros(self.horizon)
        return RegretReport(
            mean_trace=mean_trace,
            oracle_trace=self.oracle.copy(),
            cum_regret=np.cumsum(mean_trace - self.oracle),
            n_sub=self.sum_n_sub / runs,
            classical_regret=self.sum_classical / runs,
            runs=runs,
            stderr_regret=stderr,
            diverged_runs=self.diverged_runs,
            usage=self.usage_counts / runs,
            reception_rate=(
                self.late_receptions / self.late_steps if self.late_steps else math.nan
            ),
        )


def estimation_regret(
    records: Iterable[RunRecord], oracle: np.ndarray, bank: ChannelBank
) -> RegretReport:
    accumulator = RegretAccumulator(oracle, bank)
    for record in records:
        accumulator.add(record)
    if accumulator.runs == 0:
        raise ValueError('estimation_regret needs at least one run record')
    return accumulator.report()


def channel_usage(records: Iterable[RunRecord], M: int) -> np.ndarray:
    """Share of runs selecting each channel at each step, shape (M, T)."""
    counts = None
    runs = 0
    for record in records:
        selections = np.asarray(record.selections)
        if counts is None:
            counts = np.zeros((M, len(selections)), dtype=np.int64)
        np.add.at(counts, (selections, np.arange(len(selections))), 1)
        runs += 1
    if not runs:
        raise ValueError('channel_usage needs at least one run record')
    return counts / runs


class ScalingClass(Enum):
    logarithmic = 'logarithmic'
    linear = 'linear'
    indeterminate = 'indeterminate'


@dataclass(frozen=True)
class ScalingFit:
    classification: ScalingClass
    rss_log: float
    rss_linear: float
    # r(T) ≈ a log T + b
    log_coeffs: tuple
    # r(T) ≈ c T + d
    linear_coeffs: tuple
    burn_in: int

    @property
    def rss_ratio(self) -> float:
        if self.rss_linear == 0.0:
            return math.inf if self.rss_log > 0.0 else 1.0
        return self.rss_log / self.rss_linear


def _least_squares(features: np.ndarray, y: np.ndarray):
    design = np.column_stack([features, np.ones_like(features)])
    coeffs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coeffs
    return (float(coeffs[0]), float(coeffs[1])), float(residual @ residual)


def scaling_fit(
    cum_regret: Sequence[float],
    burn_in: Optional[int] = None,
    stderr: Optional[Sequence[float]] = None,
) -> ScalingFit:
    """
    Compare a·log T + b against c·T + d on T > burn_in (T counts from 1).

    The model with the smaller residual sum of squares wins unless the ratio falls in
    [0.8, 1.25]. A constant series, or one whose final value is within 3 standard errors
    of zero when `stderr` is given, is indeterminate.
    """
    y_all = np.asarray(cum_regret, dtype=float)
    if burn_in is None:
        burn_in = len(y_all) // 10
    if burn_in < 0 or len(y_all) < max(10 * burn_in, 3):
        raise ValueError(
            f'series of length {len(y_all)} is too short for burn-in {burn_in} '
            '(needs at least 10x burn-in)'
        )

    T = np.arange(1, len(y_all) + 1, dtype=float)
    mask = T > burn_in
    t, y = T[mask], y_all[mask]

    log_coeffs, rss_log = _least_squares(np.log(t), y)
    linear_coeffs, rss_linear = _least_squares(t, y)

    scale = max(1.0, float(np.max(np.abs(y))))
    degenerate = float(np.ptp(y)) <= 1e-12 * scale
    if stderr is not None:
        degenerate |= abs(y_all[-1]) < 3.0 * float(np.asarray(stderr)[-1])

    fit = ScalingFit(
        classification=ScalingClass.indeterminate,
        rss_log=rss_log,
        rss_linear=rss_linear,
        log_coeffs=log_coeffs,
        linear_coeffs=linear_coeffs,
        burn_in=burn_in,
    )
    low, high = INDETERMINATE_RSS_BAND
    if degenerate or low <= fit.rss_ratio <= high:
        return fit
    if fit.rss_ratio < low:
        return replace(fit, classification=ScalingClass.logarithmic)
    return replace(fit, classification=ScalingClass.linear)
