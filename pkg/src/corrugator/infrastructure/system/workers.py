from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

import psutil

T = TypeVar("T")

# Rough float64 working set per evaluated point: a few hundred series
# coefficients for the deeper stage expressions.
BYTES_PER_POINT = 64 * 1024

MIN_CHUNK = 256
MAX_CHUNK = 65536


def worker_count() -> int:
    """Physical cores, falling back to logical ones, at least 1."""
    count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
    return max(1, int(count))


def chunk_size(total: int, bytes_per_point: int = BYTES_PER_POINT) -> int:
    """
    Points per chunk for a float64 batch evaluation of ``total`` points.

    Behavior
    --------
    - Bounded by a quarter of the currently available memory shared by all
      workers, and by MIN_CHUNK / MAX_CHUNK.
    - Never more than needed to split ``total`` evenly over the workers.
    """
    workers = worker_count()
    try:
        available = int(psutil.virtual_memory().available)
    except Exception:
        available = 1 << 30
    by_memory = max(MIN_CHUNK, available // 4 // workers // max(1, bytes_per_point))
    by_split = max(MIN_CHUNK, -(-total // workers))
    return int(min(MAX_CHUNK, by_memory, by_split))


def map_chunks(
    fn: Callable[[int, int], T],
    total: int,
    chunk: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> List[T]:
    """
    Run ``fn(start, stop)`` over consecutive slices of ``range(total)``.

    Results come back in slice order, so reductions over them are
    deterministic whatever the scheduling. A single slice runs inline.
    """
    if total <= 0:
        return []
    size = chunk or chunk_size(total)
    bounds = [(s, min(total, s + size)) for s in range(0, total, size)]
    if len(bounds) == 1:
        return [fn(*bounds[0])]
    workers = max_workers or min(worker_count(), len(bounds))
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="corrugator-eval") as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in bounds]
        return [f.result() for f in futures]


def peak_rss_bytes() -> int:
    """Resident set size of this process (peak where the platform reports it)."""
    try:
        info = psutil.Process().memory_info()
    except Exception:
        return 0
    return int(getattr(info, "peak_wset", 0) or info.rss)
