"""Seeded random streams and order-preserving parallel execution.

Stream derivation rule: the stream for work item ``key = (k1, k2, ...)`` under
root seed ``seed`` is ``PCG64(SeedSequence(seed, spawn_key=key))``.  Work is cut
into fixed-size blocks whose keys do not depend on how many workers run them,
and results are merged by block index, so outputs are identical for any worker
count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

# tags keep the key spaces of different experiment kinds apart
TAG_TRAJECTORY = 1
TAG_MOMENT = 2
TAG_SDE = 3
TAG_HITTING = 4
TAG_RENEWAL = 5
TAG_STATIONARY = 6

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(check_seed(seed), spawn_key=key)))


def blocks(total: int, block_size: int) -> list[tuple[int, int, int]]:
    """Split ``range(total)`` into ``(block_index, start, stop)`` triples."""
    return [(b, start, min(start + block_size, total))
            for b, start in enumerate(range(0, total, block_size))]


def ordered_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally fanned out to a process pool."""
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def merge_moments(parts: Iterable[tuple[int, float, float]]) -> tuple[int, float, float]:
    """Merge ``(count, mean, M2)`` partials in the given order (Chan et al.)."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def summarize(values: np.ndarray) -> tuple[int, float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0, 0.0, 0.0
    mean = float(values.mean())
    return values.size, mean, float(((values - mean) ** 2).sum())
