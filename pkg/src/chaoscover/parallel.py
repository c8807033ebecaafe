"""Thread-pool fan-out for seeded trial batches.

Each trial's outcome depends only on its own seed, so splitting the seed
array over any number of workers returns identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_threads = None


def set_threads(n: int | None):
    global _threads
    _threads = None if n is None else max(1, int(n))


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("CHAOSCOVER_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_seeds(batch_fn, seeds: np.ndarray, threads: int | None = None) -> np.ndarray:
    """Apply ``batch_fn(seed_chunk) -> int64 array`` over ``seeds`` in order."""
    threads = get_threads() if threads is None else max(1, int(threads))
    seeds = np.ascontiguousarray(seeds, dtype=np.uint64)
    if threads == 1 or len(seeds) < 2:
        return np.asarray(batch_fn(seeds), dtype=np.int64)
    chunks = np.array_split(seeds, min(threads * 4, len(seeds)))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(batch_fn, chunks))
    return np.concatenate(parts).astype(np.int64)
