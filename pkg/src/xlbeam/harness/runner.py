"""Deterministic Monte Carlo scheduling.

Every trial owns an RNG stream keyed by (root seed, trial index), so
results are independent of worker count and scheduling order.  Workers
process whole trials; aggregation merges by trial index.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """The canonical per-trial generator."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def run_trials(worker, n_trials: int, seed: int, workers: int = 1) -> list:
    """Run ``worker(trial_index, rng)`` for every trial, in index order.

    The same per-trial streams are used regardless of ``workers``, so a
    parallel run returns exactly the sequential result.
    """
    def one(i):
        return worker(i, trial_rng(seed, i))

    if workers <= 1:
        return [one(i) for i in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_trials)))
