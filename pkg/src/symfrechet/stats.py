"""Small estimators shared by the sampling and experiment modules."""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("Wilson interval needs at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the exact bounds at k = 0 and k = N are 0 and 1; center -/+ half only
    # reaches them up to cancellation
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def nearest_rank(values, q: float) -> float:
    """Nearest-rank quantile: the ceil(q * n)-th smallest value (rank >= 1)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise DomainError("quantile of an empty sample")
    if not 0 < q <= 1:
        raise DomainError("quantile level must lie in (0, 1]")
    rank = max(1, math.ceil(q * v.size - 1e-12))
    return float(v[rank - 1])
