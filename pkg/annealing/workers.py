import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return os.cpu_count() or 1


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one task, keyed by the run seed and task coordinates."""
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def parallel_map(fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> list[R]:
    """Maps fn over tasks, results in submission order. fn must be a module-level function."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    logger.debug(f"Running {len(tasks)} tasks on {min(workers, len(tasks))} worker processes.")
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
