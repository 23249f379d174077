"""Replicate-parallel map with deterministic, index-ordered results."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence


def map_replicates(fn: Callable, args: Sequence, threads: int = 1) -> list:
    """``[fn(a) for a in args]``, optionally over a process pool.

    ``fn`` must be a picklable top-level callable. Results come back in
    argument order regardless of completion order.
    """
    if threads <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    chunk = max(1, len(args) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args, chunksize=chunk))
