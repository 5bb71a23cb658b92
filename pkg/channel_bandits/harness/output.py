"""CSV writers for harness results. Floats are printed with 10 significant digits."""

import logging
from typing import Iterable, Optional

from channel_bandits import write_csv
from channel_bandits.policies import PolicySpec
from channel_bandits.regret import RegretReport, ScalingFit

logger = logging.getLogger(__name__)

POLICY_COLUMNS = (
    'k',
    'mean_trace',
    'oracle_trace',
    'cum_regret',
    'stderr_regret',
    'n_sub_mean',
    'classical_regret_mean',
)
SUMMARY_COLUMNS = (
    'policy',
    'epsilon',
    'theta_c_hat',
    'T',
    'runs',
    'regret_T',
    'stderr_T',
    'n_sub_T',
    'diverged_runs',
    'scaling_class',
)
SUMMARY_FILE_NAME = 'summary.csv'


def write_policy_csv(outdir: str, label: str, report: RegretReport) -> str:
    rows = (
        (
            k + 1,
            float(report.mean_trace[k]),
            float(report.oracle_trace[k]),
            float(report.cum_regret[k]),
            float(report.stderr_regret[k]),
            float(report.n_sub[k]),
            float(report.classical_regret[k]),
        )
        for k in range(report.horizon)
    )
    return write_csv(outdir, f'{label}.csv', POLICY_COLUMNS, rows)


def write_usage_csv(outdir: str, label: str, report: RegretReport) -> str:
    M = report.usage.shape[0]
    header = ['k'] + [f'channel_{m}' for m in range(M)]
    rows = (
        [k + 1] + [float(share) for share in report.usage[:, k]] for k in range(report.horizon)
    )
    return write_csv(outdir, f'{label}_usage.csv', header, rows)


def summary_row(
    label: str, spec: PolicySpec, report: RegretReport, fit: Optional[ScalingFit]
) -> tuple:
    return (
        label,
        spec.epsilon,
        spec.theta_c_hat,
        report.horizon,
        report.runs,
        report.regret_T,
        report.stderr_T,
        report.n_sub_T,
        report.diverged_runs,
        fit.classification.value if fit else None,
    )


def write_summary_csv(outdir: str, rows: Iterable[tuple]) -> str:
    return write_csv(outdir, SUMMARY_FILE_NAME, SUMMARY_COLUMNS, rows)
