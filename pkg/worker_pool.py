"""
Compute worker pool shared by every build phase.
"""
import logging
import os
import time
from typing import Callable, Iterable, List

from joblib import Parallel, delayed

TRT_THREADS = os.getenv("TRT_THREADS")
TRT_BACKEND = os.getenv("TRT_BACKEND", "threading")

logger = logging.getLogger(__name__)


def get_worker_count() -> int:
    """Worker cap: TRT_THREADS when set, otherwise the CPU count."""
    if TRT_THREADS:
        try:
            return max(1, int(TRT_THREADS))
        except ValueError:
            logger.warning(f"[WORKERS] Ignoring invalid TRT_THREADS={TRT_THREADS!r}")
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Iterable, tag: str = "task") -> List:
    """
    Order-preserving map over items.

    Each call writes only its own result slot, so the output does not depend
    on the worker count. With a single worker or item the map runs inline.
    """
    items = list(items)
    workers = min(get_worker_count(), max(len(items), 1))
    start = time.perf_counter()

    if workers == 1:
        results = [fn(item) for item in items]
    else:
        results = Parallel(n_jobs=workers, backend=TRT_BACKEND)(
            delayed(fn)(item) for item in items
        )

    elapsed = time.perf_counter() - start
    logger.debug(f"[WORKERS] {tag}: {len(items)} items on {workers} workers in {elapsed:.2f}s")
    return list(results)
