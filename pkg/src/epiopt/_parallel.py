"""Index-ordered parallel sample evaluation.

Workers write into preallocated slots keyed by sample index, so results
are identical for any worker count (including 1) and any scheduling
order.  Threads are the right tool here: the compiled kernels release
the GIL while simulating.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable


def indexed_map(func: Callable[[int], None], count: int, workers: int) -> None:
    """Run func(i) for i in range(count); func writes results by index."""
    if workers <= 1 or count <= 1:
        for i in range(count):
            func(i)
        return
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        # consume the iterator to surface worker exceptions
        for _ in pool.map(func, range(count)):
            pass
