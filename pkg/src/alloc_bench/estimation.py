"""Rolling sample moments of daily returns for the allocation solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .market_data import ReturnsFrame

__all__ = ["CovarianceEstimate", "rolling_estimate", "portfolio_moments"]

# Ridge policy: symmetrized sample covariance gets 1e-8 * mean diagonal added
# to its diagonal whenever its smallest eigenvalue drops below EIG_FLOOR.
EIG_FLOOR = 1e-10
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class CovarianceEstimate:
    """Per-asset mean vector and symmetric PSD covariance over one window."""

    mean: np.ndarray
    cov: np.ndarray
    window: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise ValidationError(f"mean must be a vector, got shape {mean.shape}")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValidationError(f"cov must be {n}x{n}, got {cov.shape}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValidationError("non-finite moment estimate")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValidationError("covariance must be symmetric")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_assets(self) -> int:
        return self.mean.shape[0]


def rolling_estimate(returns: ReturnsFrame, end_index: int, window: int) -> CovarianceEstimate:
    """Moments over return rows ``[end_index - window, end_index)``.

    The covariance uses the unbiased ``window - 1`` divisor and is
    symmetrized. If its minimum eigenvalue falls below ``EIG_FLOOR``,
    ``RIDGE_SCALE * trace / n`` is added to the diagonal.
    """
    if window < 2:
        raise ValidationError(f"window must be >= 2, got {window}")
    if end_index > returns.n_days:
        raise InsufficientDataError(
            f"end_index {end_index} beyond {returns.n_days} return rows"
        )
    if end_index < window:
        raise InsufficientDataError(
            f"need {window} return rows before index {end_index}, have {end_index}"
        )
    block = returns.returns[end_index - window : end_index]
    mean = block.mean(axis=0)
    centered = block - mean
    cov = centered.T @ centered / (window - 1)
    cov = (cov + cov.T) / 2.0
    if np.linalg.eigvalsh(cov).min() < EIG_FLOOR:
        n = cov.shape[0]
        cov = cov + np.eye(n) * (RIDGE_SCALE * np.trace(cov) / n)
    return CovarianceEstimate(mean=mean, cov=cov, window=window)


def portfolio_moments(estimate: CovarianceEstimate, weights) -> tuple[float, float]:
    """Expected return and standard deviation of a weighted portfolio.

    Returns ``(w @ mean, sqrt(w @ cov @ w))``; the variance is floored at
    zero to absorb sign noise from degenerate covariances.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (estimate.n_assets,):
        raise ValidationError(
            f"weights shape {w.shape} does not match {estimate.n_assets} assets"
        )
    expected = float(w @ estimate.mean)
    variance = float(w @ estimate.cov @ w)
    return expected, float(np.sqrt(max(variance, 0.0)))
