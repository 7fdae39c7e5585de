import time

import pytest

from clickprop import LikelihoodEstimator, SimConfig, simulate_pairs


@pytest.fixture(scope="session")
def sim42():
    """Default-config dataset at seed 42, shared across the suite."""
    start = time.perf_counter()
    pairs, truth = simulate_pairs(SimConfig(seed=42))
    return pairs, truth, time.perf_counter() - start


@pytest.fixture(scope="session")
def interp_fit42(sim42):
    pairs, _, _ = sim42
    start = time.perf_counter()
    est = LikelihoodEstimator(parametrization="interpolated").fit(pairs)
    return est, time.perf_counter() - start


@pytest.fixture(scope="session")
def direct_fit42(sim42):
    pairs, _, _ = sim42
    start = time.perf_counter()
    est = LikelihoodEstimator(parametrization="direct").fit(pairs)
    return est, time.perf_counter() - start
