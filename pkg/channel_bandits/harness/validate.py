import logging
from dataclasses import dataclass
from typing import List, Optional

from channel_bandits.channels import is_stabilizable
from channel_bandits.config_file_reader import ExperimentConfig, require_trace_cap
from channel_bandits.estimator import epsilon_stability_bound, expected_series
from channel_bandits.harness_logging import log_standard_error
from channel_bandits.model import steady_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilitySummary:
    rho: float
    theta_c: float
    steady_trace: float
    thetas: List[float]
    stabilizing: List[bool]
    m_star: int
    theta_star: float
    stabilizable: bool
    # None when the bank cannot be stabilized
    epsilon_bound: Optional[float]
    oracle_fixed_point_trace: Optional[float]


def cmd_validate(config: ExperimentConfig) -> StabilitySummary:
    """
    Stability figures for a config without simulating anything. Prints a readable report
    and returns the same numbers.
    """
    print('Validating experiment configuration...')
    steady = steady_state(config.model)
    require_trace_cap(config, steady)
    bank = config.bank
    stabilizable = is_stabilizable(bank, steady.theta_c)

    epsilon_bound = None
    oracle_fixed_point = None
    if stabilizable:
        epsilon_bound = epsilon_stability_bound(bank, steady.theta_c)
        oracle_fixed_point = expected_series(
            config.model, bank.theta_star, 1, cap=config.trace_cap, steady=steady
        ).fixed_point_trace
    else:
        log_standard_error(logging.WARNING, 4002, [bank.theta_star, steady.theta_c], logger)

    summary = StabilitySummary(
        rho=steady.rho,
        theta_c=steady.theta_c,
        steady_trace=steady.trace,
        thetas=bank.to_list(),
        stabilizing=[bool(theta > steady.theta_c) for theta in bank.thetas],
        m_star=bank.m_star,
        theta_star=bank.theta_star,
        stabilizable=stabilizable,
        epsilon_bound=epsilon_bound,
        oracle_fixed_point_trace=oracle_fixed_point,
    )

    print(f'  spectral radius rho(A):     {summary.rho:.6g}')
    print(f'  critical probability:       {summary.theta_c:.6g}')
    print(f'  tr(Pbar):                   {summary.steady_trace:.6g}')
    for m, (theta, ok) in enumerate(zip(summary.thetas, summary.stabilizing)):
        marker = 'stabilizing' if ok else 'not stabilizing'
        best = ' (best)' if m == summary.m_star else ''
        print(f'  channel {m}: theta={theta:.6g}  {marker}{best}')
    if stabilizable:
        print(f'  epsilon-greedy stable for:  0 < epsilon < {min(epsilon_bound, 1.0):.6g}')
        print(f'  oracle steady tr E[P]:      {oracle_fixed_point:.6g}')
    else:
        print('  no channel exceeds the critical probability; every policy diverges')

    logger.info(
        f'Validated config: theta_c={summary.theta_c:.6g}, m*={summary.m_star}, '
        f'stabilizable={summary.stabilizable}'
    )
    return summary
