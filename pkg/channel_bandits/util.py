import logging
from itertools import islice
from typing import Iterator

import psutil

logger = logging.getLogger(__name__)


def batched(iterable, n: int) -> Iterator[tuple]:
    "Batch data into tuples of length n. The last batch may be shorter."
    # batched('ABCDEFG', 3) --> ABC DEF G
    if n < 1:
        raise ValueError('n must be at least one')
    it = iter(iterable)
    while batch := tuple(islice(it, n)):
        yield batch


def default_worker_count() -> int:
    # physical cores; hyperthreads do not help the per-step numpy calls
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def host_diagnostics() -> dict:
    process = psutil.Process()
    return {
        'cpu_count_logical': psutil.cpu_count(),
        'cpu_count_physical': psutil.cpu_count(logical=False),
        'rss_mb': round(process.memory_info().rss / 1e6, 1),
        'total_memory_mb': round(psutil.virtual_memory().total / 1e6, 1),
    }
