import functools
import os
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_DIR = os.path.join(ROOT, "configs")

# wall time of the first (uncached) evaluation of each suite
SUITE_SECONDS: dict = {}


@functools.lru_cache(maxsize=None)
def suite_results(name: str, seed: int = 0):
    from symfrechet import invariants

    t0 = time.perf_counter()
    res = tuple(invariants.run_suite(name, seed))
    SUITE_SECONDS[name, seed] = time.perf_counter() - t0
    return res


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
