"""Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a 64-bit master
seed and an integer path, e.g. ``(scenario, row, n, replication)``:

    Generator(Philox(SeedSequence(master_seed, spawn_key=path)))

SeedSequence hashing and Philox are defined bit-exactly by NumPy, so a given
``(seed, path)`` yields the same draws on every platform and in every worker
process, independent of scheduling.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed: int, *path: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if any(int(p) < 0 for p in path):
        raise ValueError("stream path components must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
