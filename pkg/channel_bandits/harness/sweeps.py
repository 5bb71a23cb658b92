import logging
import time
from dataclasses import replace
from typing import Sequence

from channel_bandits import write_csv
from channel_bandits.config_file_reader import ExperimentConfig
from channel_bandits.estimator import epsilon_greedy_asymptotic_theta, epsilon_stability_bound
from channel_bandits.harness import (
    require_stabilizable,
    simulate_policies,
    write_experiment_outputs,
)
from channel_bandits.harness.manifest import ExperimentManifest
from channel_bandits.harness_logging import log_entry_exit
from channel_bandits.model import steady_state
from channel_bandits.policies import PolicyKind, PolicySpec
from channel_bandits.util import host_diagnostics

logger = logging.getLogger(__name__)

EPSILON_SWEEP_FILE_NAME = 'epsilon_sweep.csv'
EPSILON_SWEEP_COLUMNS = (
    'epsilon',
    'final_mean_trace',
    'diverged_fraction',
    'reception_rate',
    'asymptotic_theta',
    'analytic_stable',
    'simulated_stable',
    'epsilon_bound',
)
SCALING_FILE_NAME = 'scaling.csv'
SCALING_COLUMNS = ('policy', 'T', 'cum_regret', 'stderr_regret', 'n_sub_mean')
SCALING_SUMMARY_FILE_NAME = 'scaling_summary.csv'
SCALING_SUMMARY_COLUMNS = (
    'policy',
    'scaling_class',
    'rss_log',
    'rss_linear',
    'rss_ratio',
    'log_slope',
    'log_intercept',
    'linear_slope',
    'linear_intercept',
    'burn_in',
)


@log_entry_exit(logger)
def cmd_epsilon_sweep(
    config: ExperimentConfig,
    epsilons: Sequence[float],
    outdir: str,
    workers: int = 1,
    progress: bool = False,
) -> str:
    """
    ε-greedy at each ε, labelled stable or unstable two ways:

      analytic   θ̃(ε) = (1 - ε) θ* + ε mean(θ) exceeds θ_c
      simulated  the measured reception rate over the second half of the horizon exceeds θ_c

    A Monte Carlo mean rarely reaches the trace cap at desk-scale run counts even when the
    expected covariance diverges, so the simulated label comes from the reception rate.
    """
    start = time.perf_counter()
    steady = steady_state(config.model)
    require_stabilizable(config.bank, steady)
    bound = epsilon_stability_bound(config.bank, steady.theta_c)

    policies = [PolicySpec(PolicyKind.epsilon_greedy, epsilon=eps) for eps in epsilons]
    result = simulate_policies(config, policies, workers=workers, progress=progress, steady=steady)

    rows = []
    for spec in policies:
        report = result.reports[spec.label]
        asymptotic_theta = epsilon_greedy_asymptotic_theta(config.bank, spec.epsilon)
        analytic_stable = asymptotic_theta > steady.theta_c
        simulated_stable = report.reception_rate > steady.theta_c
        if analytic_stable != simulated_stable:
            logger.warning(
                f'epsilon={spec.epsilon}: analytic and simulated stability labels disagree '
                f'(theta~={asymptotic_theta:.4f}, measured {report.reception_rate:.4f}, '
                f'theta_c={steady.theta_c:.4f})'
            )
        rows.append(
            (
                spec.epsilon,
                float(report.mean_trace[-1]),
                report.diverged_fraction,
                report.reception_rate,
                asymptotic_theta,
                analytic_stable,
                simulated_stable,
                bound,
            )
        )

    path = write_csv(outdir, EPSILON_SWEEP_FILE_NAME, EPSILON_SWEEP_COLUMNS, rows)
    ExperimentManifest(
        command='epsilon-sweep',
        master_seed=config.seed,
        workers=workers,
        config=config.to_dict(),
        policies={spec.label: ordinal for ordinal, spec in enumerate(policies)},
        parameters={'epsilons': list(epsilons), 'epsilon_bound': bound},
        files=[path],
        host=host_diagnostics(),
        wall_clock_seconds=round(time.perf_counter() - start, 3),
    ).to_local_file(outdir)
    return path


@log_entry_exit(logger)
def cmd_scaling(
    config: ExperimentConfig,
    horizons: Sequence[int],
    outdir: str,
    workers: int = 1,
    progress: bool = False,
) -> str:
    """
    One experiment at the largest horizon; the cumulative regret is reported at each
    requested T and the full curve is classified as logarithmic or linear.
    """
    start = time.perf_counter()
    config = replace(config, horizon=max(horizons))
    result = simulate_policies(config, config.policies, workers=workers, progress=progress)
    files = write_experiment_outputs(result, outdir)

    rows = []
    summary = []
    for label, report in result.reports.items():
        for T in horizons:
            prefix = report.prefix(T)
            rows.append((label, T, prefix.regret_T, prefix.stderr_T, prefix.n_sub_T))

        fit = result.fits[label]
        if fit is None:
            summary.append((label, None, None, None, None, None, None, None, None, None))
            continue
        summary.append(
            (
                label,
                fit.classification.value,
                fit.rss_log,
                fit.rss_linear,
                fit.rss_ratio,
                *fit.log_coeffs,
                *fit.linear_coeffs,
                fit.burn_in,
            )
        )
        logger.info(f'{label}: regret scaling looks {fit.classification.value}')

    path = write_csv(outdir, SCALING_FILE_NAME, SCALING_COLUMNS, rows)
    summary_path = write_csv(outdir, SCALING_SUMMARY_FILE_NAME, SCALING_SUMMARY_COLUMNS, summary)
    ExperimentManifest(
        command='scaling',
        master_seed=config.seed,
        workers=workers,
        config=config.to_dict(),
        policies={spec.label: ordinal for ordinal, spec in enumerate(config.policies)},
        parameters={'horizons': list(horizons)},
        files=[path, summary_path, *files],
        host=host_diagnostics(),
        wall_clock_seconds=round(time.perf_counter() - start, 3),
    ).to_local_file(outdir)
    return path
