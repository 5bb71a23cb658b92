import csv
import logging
import os
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

__version__ = '0.1.0'

VALID_COMMANDS = (
    'run',
    'table1',
    'epsilon-sweep',
    'scaling',
    'validate',
)

DEFAULT_RUNS = 20000
DEFAULT_HORIZON = 1000
DEFAULT_TRACE_CAP = 1e12
DEFAULT_SEED = 0
FULL_SCALE_RUNS = 100000

# Runs are folded in fixed-size chunks so the summation order never depends on the
# number of workers.
RUN_CHUNK_SIZE = 250

SIGNIFICANT_DIGITS = 10


def format_float(value: float) -> str:
    return f'{value:.{SIGNIFICANT_DIGITS}g}'


def format_cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(outdir: str, filename: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write a CSV file with floats at 10 significant digits and return its path."""
    path = os.path.join(outdir, filename)
    with open(path, 'w', newline='') as outfile:
        writer = csv.writer(outfile, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    logger.debug(f'Wrote {path}')
    return path
