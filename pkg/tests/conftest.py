import numpy as np
import pytest

from alloc_bench.estimation import CovarianceEstimate
from alloc_bench.market_data import PriceFrame, synth_market


def random_pd_cov(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Well-conditioned random PD matrix: A A' + n I, scaled."""
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def random_estimate(rng: np.random.Generator, n: int, scale: float = 1.0) -> CovarianceEstimate:
    return CovarianceEstimate(
        mean=rng.standard_normal(n) * np.sqrt(scale),
        cov=random_pd_cov(rng, n, scale),
        window=50,
    )


def daily_estimate(rng: np.random.Generator, n: int) -> CovarianceEstimate:
    """Estimate with daily-return magnitudes (means ~1e-3, vols ~1e-2)."""
    vols = rng.uniform(0.005, 0.03, n)
    a = rng.standard_normal((n, n))
    corr_raw = a @ a.T + n * np.eye(n)
    d = np.sqrt(np.diag(corr_raw))
    corr = corr_raw / np.outer(d, d)
    cov = corr * np.outer(vols, vols)
    return CovarianceEstimate(mean=rng.normal(0.0, 1e-3, n), cov=cov, window=50)


def simplex_grid(n: int, steps: int) -> np.ndarray:
    """All weight vectors with entries k/steps summing to 1, shape (m, n)."""
    if n == 1:
        return np.ones((1, 1))
    rows = []
    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)
    rec([], steps, n)
    return np.asarray(rows, dtype=np.float64) / steps


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def small_frame() -> PriceFrame:
    return synth_market(
        n_assets=3, days=80, drift=5e-4, vol=0.01, correlation=np.eye(3), seed=11
    )


@pytest.fixture
def flat_frame() -> PriceFrame:
    """Constant prices: every return is zero."""
    return synth_market(
        n_assets=3, days=30, drift=0.0, vol=0.0, correlation=np.eye(3), seed=0
    )
