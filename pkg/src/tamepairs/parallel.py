"""Optional thread-level partitioning of grid scans.

Work is split into contiguous index blocks and results are reassembled in
block order, so outputs never depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_WORKERS = "TAMEPAIRS_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        return 1


def blocks(start: int, stop: int, size: int):
    """Contiguous half-open ranges covering [start, stop)."""
    return [(lo, min(lo + size, stop)) for lo in range(start, stop, max(1, size))]


def map_blocks(fn, ranges, workers: int | None = None):
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
