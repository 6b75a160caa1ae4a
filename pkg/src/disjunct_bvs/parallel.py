"""
Independent jobs (repetitions, benchmark cells, delta values) on a process pool.

Per-job seeds come from the master seed by one fixed rule, so results do not
depend on the number of workers:

    seed_i = SeedSequence(master, spawn_key=(i,)).generate_state(1, uint64)[0]
"""

import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit seed of job ``index`` under ``master_seed``."""
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(sequence.generate_state(1, np.uint64)[0])


def map_jobs(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item, in order.

    ``fn`` and the items must be picklable when ``jobs > 1``. Results come
    back in input order; the caller does all file writing.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(jobs, len(items))
    logger.info("Running %d jobs on %d worker processes", len(items), workers)
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, items))
