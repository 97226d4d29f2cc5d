"""Financial performance metrics over daily return series.

Conventions follow the common reporting stack: 252 trading days per year,
sample (N-1) standard deviations, drawdowns measured on the cumulative
product curve started at 1. Metrics that are mathematically undefined for
a series (zero volatility, zero drawdown, flat log-equity) raise
UndefinedMetricError; full_report maps those to None instead of numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError, ValidationError

__all__ = [
    "TRADING_DAYS_PER_YEAR",
    "MetricsReport",
    "cumulative_return",
    "annualize_return",
    "annual_volatility",
    "sharpe_ratio",
    "max_drawdown",
    "calmar_ratio",
    "stability",
    "full_report",
]

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class MetricsReport:
    """The seven summary statistics; None marks an undefined metric."""

    annual_return: float
    cumulative_return: float
    annual_volatility: float
    sharpe: float | None
    calmar: float | None
    stability: float | None
    max_drawdown: float


def _as_returns(returns, min_length: int = 1) -> np.ndarray:
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 1:
        raise ValidationError(f"returns must be one-dimensional, got shape {r.shape}")
    if r.size < min_length:
        raise ValidationError(f"need at least {min_length} returns, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValidationError("non-finite return")
    if np.any(r <= -1.0):
        raise ValidationError("return at or below -100%")
    return r


def _equity_curve(r: np.ndarray) -> np.ndarray:
    # V_0 = 1 prepended so drawdowns can measure declines from the start.
    return np.concatenate([[1.0], np.cumprod(1.0 + r)])


def cumulative_return(returns) -> float:
    """prod(1 + r) - 1 over the whole series."""
    r = _as_returns(returns)
    return float(np.prod(1.0 + r) - 1.0)


def annualize_return(cumulative: float, days: int) -> float:
    """Geometric annualization: (1 + cumulative)^(252 / days) - 1."""
    if days < 1:
        raise ValidationError("days must be >= 1")
    if not (cumulative > -1.0):
        raise ValidationError("cumulative return must exceed -100%")
    return float((1.0 + cumulative) ** (TRADING_DAYS_PER_YEAR / days) - 1.0)


def annual_volatility(returns) -> float:
    """Sample standard deviation of daily returns scaled by sqrt(252)."""
    r = _as_returns(returns, min_length=2)
    # identical observations have zero deviation; np.std leaves ~1e-18 noise
    if np.all(r == r[0]):
        return 0.0
    return float(r.std(ddof=1) * math.sqrt(TRADING_DAYS_PER_YEAR))


def sharpe_ratio(returns, risk_free_daily: float = 0.0) -> float:
    """Annualized mean/stdev of daily excess returns.

    Raises UndefinedMetricError when the excess returns have zero variance.
    """
    r = _as_returns(returns, min_length=2)
    if not math.isfinite(risk_free_daily):
        raise ValidationError("risk_free_daily must be finite")
    excess = r - risk_free_daily
    sd = float(excess.std(ddof=1))
    if sd == 0.0 or np.all(r == r[0]):
        raise UndefinedMetricError("sharpe ratio undefined for zero-volatility returns")
    return float(excess.mean() / sd * math.sqrt(TRADING_DAYS_PER_YEAR))


def max_drawdown(returns) -> float:
    """Largest peak-to-trough decline of the equity curve, as a non-positive number.

    min over t of V_t / max_{s <= t} V_s - 1 with V the cumulative product
    curve starting at 1.
    """
    r = _as_returns(returns)
    curve = _equity_curve(r)
    running_peak = np.maximum.accumulate(curve)
    return float((curve / running_peak - 1.0).min())


def calmar_ratio(annual_ret: float, mdd: float) -> float:
    """Annual return divided by absolute max drawdown.

    Raises UndefinedMetricError when the drawdown is zero.
    """
    if not math.isfinite(annual_ret):
        raise ValidationError("annual return must be finite")
    if mdd > 0.0 or not math.isfinite(mdd):
        raise ValidationError(f"max drawdown must be <= 0, got {mdd}")
    if mdd == 0.0:
        raise UndefinedMetricError("calmar ratio undefined for zero drawdown")
    return float(annual_ret / abs(mdd))


def stability(returns) -> float:
    """R-squared of ordinary least squares of log-equity against time.

    Fits log(V_t) for t = 1..N against the index. Raises
    UndefinedMetricError when log-equity has zero variance.
    """
    r = _as_returns(returns, min_length=3)
    log_equity = np.cumsum(np.log1p(r))
    t = np.arange(log_equity.size, dtype=np.float64)
    y_center = log_equity - log_equity.mean()
    ss_tot = float(y_center @ y_center)
    if ss_tot == 0.0:
        raise UndefinedMetricError("stability undefined for flat log-equity")
    t_center = t - t.mean()
    slope = float(t_center @ y_center) / float(t_center @ t_center)
    residual = y_center - slope * t_center
    return float(1.0 - (residual @ residual) / ss_tot)


def full_report(returns, risk_free_daily: float = 0.0) -> MetricsReport:
    """All seven metrics for one daily return series (length >= 3)."""
    r = _as_returns(returns, min_length=3)
    cum = cumulative_return(r)
    annual = annualize_return(cum, r.size)
    vol = annual_volatility(r)
    mdd = max_drawdown(r)
    try:
        sharpe = sharpe_ratio(r, risk_free_daily)
    except UndefinedMetricError:
        sharpe = None
    try:
        calmar = calmar_ratio(annual, mdd)
    except UndefinedMetricError:
        calmar = None
    try:
        stab = stability(r)
    except UndefinedMetricError:
        stab = None
    return MetricsReport(
        annual_return=annual,
        cumulative_return=cum,
        annual_volatility=vol,
        sharpe=sharpe,
        calmar=calmar,
        stability=stab,
        max_drawdown=mdd,
    )
