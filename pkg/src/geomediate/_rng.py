"""Indexed, counter-based random streams.

A stream is identified by ``(seed, *index)``; the same identifier always
yields the same draws, so work split across any number of workers is
reproducible as long as each unit of work owns its own index.
"""

import numpy as np


def stream(seed, *index):
    key = np.random.SeedSequence([int(seed), *(int(i) for i in index)])
    return np.random.Generator(np.random.Philox(key))


def chunks(total, workers):
    """Split ``range(total)`` into at most ``workers`` contiguous ranges."""
    workers = max(1, min(int(workers), total)) if total else 1
    bounds = np.linspace(0, total, workers + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_chunked(func, total, workers=1):
    """Evaluate ``func(range)`` over chunks and concatenate in index order."""
    parts = chunks(total, workers)
    if len(parts) <= 1:
        return [func(r) for r in parts]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        return list(pool.map(func, parts))
