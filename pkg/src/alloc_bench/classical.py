"""Single-period allocation rules built on rolling moment estimates.

Four strategies: equal weight, minimum variance, tangency (maximum Sharpe),
and equal risk contribution. Long-only problems are solved by projected
gradient descent onto the simplex with spectral (Barzilai-Borwein) trial
steps and nonmonotone Armijo backtracking; risk parity uses a damped Newton
iteration; the unconstrained shorting mode uses the Lagrangian closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConvergenceError,
    InfeasibleError,
    NoTangencyError,
    NumericalError,
    ValidationError,
)
from .estimation import CovarianceEstimate

__all__ = [
    "WeightVector",
    "SolverConfig",
    "FrontierPoint",
    "project_to_simplex",
    "equal_weight",
    "solve_min_variance",
    "solve_tangency",
    "solve_risk_parity",
    "efficient_frontier",
]

WEIGHT_SUM_TOL = 1e-9
LONG_ONLY_FLOOR = -1e-12
# Sharpe denominators are floored here to keep the ratio finite on degenerate
# iterates; anything that actually hits the floor is treated as singular.
VARIANCE_FLOOR = 1e-18


@dataclass(frozen=True)
class WeightVector:
    """Portfolio weights summing to one; non-negative unless allow_short."""

    weights: np.ndarray
    allow_short: bool = False

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or w.size < 1:
            raise ValidationError(f"weights must be a non-empty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("non-finite weight")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
        if not self.allow_short and float(w.min()) < LONG_ONLY_FLOOR:
            raise ValidationError(f"negative weight {w.min()!r} in long-only mode")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs.

    target_return applies to solve_min_variance only and is an equality
    constraint on the portfolio's expected return. tol is the stopping
    threshold on the unit-step projected-gradient norm (long-only mode)
    or the Newton residual (risk parity).
    """

    long_only: bool = True
    risk_free_rate: float = 0.0
    target_return: float | None = None
    max_iter: int = 10000
    tol: float = 1e-10

    def __post_init__(self):
        if not math.isfinite(self.risk_free_rate):
            raise ValidationError("risk_free_rate must be finite")
        if self.target_return is not None and not math.isfinite(self.target_return):
            raise ValidationError("target_return must be finite")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if not (self.tol > 0.0):
            raise ValidationError("tol must be positive")


@dataclass(frozen=True)
class FrontierPoint:
    """One efficient-frontier sample: achieved mean, stdev, and weights."""

    expected_return: float
    stdev: float
    weights: WeightVector


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sorted-threshold method: sort descending, find the largest k whose
    prefix admits a positive shift, subtract the threshold, clip at zero.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u)
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - cumsum) / k > 0.0)[0][-1]
    theta = (cumsum[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def equal_weight(n_assets: int) -> WeightVector:
    if n_assets < 1:
        raise ValidationError("n_assets must be >= 1")
    return WeightVector(np.full(n_assets, 1.0 / n_assets))


def _spg_minimize(fun, grad, w0, max_iter, tol):
    """Projected gradient descent on the simplex.

    Barzilai-Borwein trial steps safeguarded by nonmonotone Armijo
    backtracking (10-value reference window). Stops when the unit-step
    projected-gradient infinity norm drops below tol. Returns (w, residual).
    """
    w = np.array(w0, dtype=np.float64)
    g = grad(w)
    f = fun(w)
    history = [f]
    step_trial = 1.0 / max(float(np.abs(g).max()), 1e-12)
    for _ in range(max_iter):
        pg = float(np.abs(project_to_simplex(w - g) - w).max())
        if pg < tol:
            return w, pg
        f_ref = max(history)
        step = min(max(step_trial, 1e-18), 1e18)
        w_new = None
        for _ in range(120):
            cand = project_to_simplex(w - step * g)
            d = cand - w
            gd = float(g @ d)
            if gd >= -1e-30:
                break
            f_cand = fun(cand)
            if f_cand <= f_ref + 1e-4 * gd:
                w_new, f_new = cand, f_cand
                break
            step *= 0.5
        if w_new is None:
            # No improving step exists at machine precision.
            if pg < tol * 1e4:
                return w, pg
            raise ConvergenceError("projected gradient descent stalled", residual=pg)
        g_new = grad(w_new)
        dw = w_new - w
        dg = g_new - g
        denom = float(dw @ dg)
        step_trial = float(dw @ dw) / denom if denom > 1e-300 else step * 2.0
        w, f, g = w_new, f_new, g_new
        history.append(f)
        if len(history) > 10:
            history.pop(0)
    pg = float(np.abs(project_to_simplex(w - g) - w).max())
    if pg < tol:
        return w, pg
    raise ConvergenceError("iteration cap reached", residual=pg)


def _check_square(estimate: CovarianceEstimate) -> tuple[np.ndarray, np.ndarray, int]:
    cov = np.asarray(estimate.cov, dtype=np.float64)
    mean = np.asarray(estimate.mean, dtype=np.float64)
    return cov, mean, mean.size


def _solve_linear(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular system in {what}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite solution in {what}")
    return x


def _minvar_lagrangian(cov, mean, nu, w_start, max_iter, tol):
    """Simplex argmin of 0.5 w'Cw - nu * w'mean, warm-started at w_start."""

    def fun(w):
        return 0.5 * float(w @ cov @ w) - nu * float(w @ mean)

    def grad(w):
        return cov @ w - nu * mean

    w, _ = _spg_minimize(fun, grad, w_start, max_iter, tol)
    return w


def _minvar_longonly_target(cov, mean, target, max_iter, tol):
    """Hit an equality return target by bisecting the return multiplier.

    The Lagrangian relaxation min 0.5 w'Cw - nu w'mean over the simplex has
    an achieved return monotone in nu, and each relaxed solution is exactly
    the minimum-variance portfolio for its own achieved return, so bisection
    lands on the constrained optimum without a penalty term.
    """
    lo, hi = float(mean.min()), float(mean.max())
    ret_scale = max(abs(lo), abs(hi), 1e-12)
    feas_tol = max(1e-15, 1e-9 * ret_scale)
    if target < lo - feas_tol or target > hi + feas_tol:
        raise InfeasibleError(
            f"target return {target} outside attainable long-only range [{lo}, {hi}]"
        )
    target = min(max(target, lo), hi)

    w = _minvar_lagrangian(cov, mean, 0.0, np.full(mean.size, 1.0 / mean.size), max_iter, tol)
    achieved = float(w @ mean)
    if abs(achieved - target) <= feas_tol:
        return w
    sign = 1.0 if target > achieved else -1.0
    var_scale = max(float(np.trace(cov)) / mean.size, 1e-30)
    nu_lo, nu_hi = 0.0, sign * var_scale / ret_scale
    w_hi = w
    for _ in range(300):
        w_hi = _minvar_lagrangian(cov, mean, nu_hi, w_hi, max_iter, tol)
        if sign * (float(w_hi @ mean) - target) >= 0.0:
            break
        nu_lo = nu_hi
        nu_hi *= 4.0
    else:
        raise ConvergenceError(
            "return multiplier search failed to bracket the target",
            residual=abs(float(w_hi @ mean) - target),
        )
    for _ in range(200):
        if abs(float(w @ mean) - target) <= feas_tol:
            break
        nu_mid = 0.5 * (nu_lo + nu_hi)
        w = _minvar_lagrangian(cov, mean, nu_mid, w, max_iter, tol)
        if sign * (float(w @ mean) - target) >= 0.0:
            nu_hi = nu_mid
        else:
            nu_lo = nu_mid
        if nu_hi - nu_lo == 0.0:
            break
    w = _refine_on_face(cov, mean, target, w)
    achieved = float(w @ mean)
    if abs(achieved - target) > max(1e-12, 1e-6 * ret_scale):
        raise ConvergenceError(
            "equality target not attained", residual=abs(achieved - target)
        )
    return w


def _refine_on_face(cov, mean, target, w):
    """Polish a bisected solution by an exact KKT solve on its active face.

    The subsolver leaves O(tol) wobble in the weights; one equality-constrained
    solve on the coordinates the bisection left positive removes it. Falls back
    to the unpolished point if the face solve goes infeasible.
    """
    active = np.flatnonzero(w > 1e-9)
    base_gap = abs(float(w @ mean) - target)
    base_obj = 0.5 * float(w @ cov @ w)
    for _ in range(w.size):
        if active.size == 0:
            return w
        m_a = mean[active]
        c_aa = cov[np.ix_(active, active)]
        k = active.size
        if k == 1:
            w_a = np.ones(1)
        else:
            spread = float(m_a.max() - m_a.min())
            with_return_row = spread > 1e-15 * max(1.0, float(np.abs(m_a).max()))
            rows = 2 + (1 if with_return_row else 0)
            kkt = np.zeros((k + rows - 1, k + rows - 1))
            kkt[:k, :k] = c_aa
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + rows - 1)
            rhs[k] = 1.0
            if with_return_row:
                kkt[:k, k + 1] = m_a
                kkt[k + 1, :k] = m_a
                rhs[k + 1] = target
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                return w
            if not np.all(np.isfinite(sol)):
                return w
            w_a = sol[:k]
        if np.all(w_a >= -1e-12):
            refined = np.zeros_like(w)
            refined[active] = np.clip(w_a, 0.0, None)
            refined /= refined.sum()
            gap = abs(float(refined @ mean) - target)
            obj = 0.5 * float(refined @ cov @ refined)
            if gap <= max(base_gap, 1e-15) and obj <= base_obj * (1.0 + 1e-9) + 1e-18:
                return refined
            return w
        active = np.delete(active, int(np.argmin(w_a)))
    return w


def solve_min_variance(estimate: CovarianceEstimate, config: SolverConfig) -> WeightVector:
    """Minimum-variance weights, optionally pinned to a target mean return.

    Long-only mode runs projected gradient descent from the equal-weight
    start; shorting mode uses the closed form C^-1 1 / (1' C^-1 1) or, with
    a target, the two-constraint Lagrangian system.
    """
    cov, mean, n = _check_square(estimate)
    if config.long_only:
        if config.target_return is None:
            def fun(w):
                return 0.5 * float(w @ cov @ w)

            def grad(w):
                return cov @ w

            w, _ = _spg_minimize(
                fun, grad, np.full(n, 1.0 / n), config.max_iter, config.tol
            )
        else:
            w = _minvar_longonly_target(
                cov, mean, float(config.target_return), config.max_iter, config.tol
            )
        return WeightVector(project_to_simplex(w))

    if config.target_return is None:
        raw = _solve_linear(cov, np.ones(n), "minimum variance")
        total = float(raw.sum())
        if abs(total) < 1e-300:
            raise NumericalError("minimum-variance normalization is zero")
        return WeightVector(raw / total, allow_short=True)

    target = float(config.target_return)
    spread = float(mean.max() - mean.min())
    if spread <= 1e-15 * max(1.0, abs(float(mean[0]))):
        # All means equal: the return constraint is either redundant or empty.
        if abs(target - float(mean[0])) <= 1e-12 * max(1.0, abs(target)):
            return solve_min_variance(estimate, replace(config, target_return=None))
        raise InfeasibleError(
            f"target return {target} unattainable: all asset means equal {mean[0]}"
        )
    kkt = np.zeros((n + 2, n + 2))
    kkt[:n, :n] = cov
    kkt[:n, n] = 1.0
    kkt[:n, n + 1] = mean
    kkt[n, :n] = 1.0
    kkt[n + 1, :n] = mean
    rhs = np.zeros(n + 2)
    rhs[n] = 1.0
    rhs[n + 1] = target
    sol = _solve_linear(kkt, rhs, "target-return minimum variance")
    return WeightVector(sol[:n], allow_short=True)


def solve_tangency(estimate: CovarianceEstimate, config: SolverConfig) -> WeightVector:
    """Maximum-Sharpe weights: maximize (w'mean - rf) / sqrt(w'Cw).

    Requires at least one asset mean strictly above the risk-free rate.
    """
    cov, mean, n = _check_square(estimate)
    rf = float(config.risk_free_rate)
    if float(mean.max()) <= rf:
        raise NoTangencyError(
            f"no asset mean exceeds the risk-free rate {rf}; tangency undefined"
        )
    excess = mean - rf

    if not config.long_only:
        raw = _solve_linear(cov, excess, "tangency")
        total = float(raw.sum())
        if total <= 1e-300:
            raise NoTangencyError(
                "tangency normalization non-positive; no finite maximum-Sharpe "
                "portfolio on the fully-invested line"
            )
        return WeightVector(raw / total, allow_short=True)

    w0 = np.full(n, 1.0 / n)
    if float(w0 @ cov @ w0) <= VARIANCE_FLOOR:
        raise NumericalError("covariance degenerate at the equal-weight start")

    def fun(w):
        s = math.sqrt(max(float(w @ cov @ w), VARIANCE_FLOOR))
        return -float(w @ excess) / s

    def grad(w):
        cw = cov @ w
        s2 = max(float(w @ cw), VARIANCE_FLOOR)
        s = math.sqrt(s2)
        e = float(w @ excess)
        return -(excess / s - e * cw / (s2 * s))

    w, _ = _spg_minimize(fun, grad, w0, config.max_iter, config.tol)
    return WeightVector(project_to_simplex(w))


def solve_risk_parity(estimate: CovarianceEstimate, config: SolverConfig) -> WeightVector:
    """Equal-risk-contribution weights via damped Newton iteration.

    Solves C w = (1/n) / w componentwise (the stationarity condition of
    min 0.5 w'Cw - (1/n) sum log w_i), halving steps to preserve positivity,
    then rescales to the simplex. Requires a positive definite covariance.
    """
    cov, _, n = _check_square(estimate)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("risk parity requires a positive definite covariance") from exc

    w = np.full(n, 1.0 / n)
    residual = math.inf
    for _ in range(config.max_iter):
        cw = cov @ w
        f_val = cw - (1.0 / n) / w
        residual = float(np.abs(f_val).max())
        if residual < config.tol:
            break
        jac = cov + (1.0 / n) * np.diag(1.0 / w**2)
        delta = _solve_linear(jac, -f_val, "risk parity Newton step")
        t = 1.0
        while np.any(w + t * delta <= 0.0):
            t *= 0.5
            if t < 1e-18:
                raise ConvergenceError(
                    "risk parity step collapsed while preserving positivity",
                    residual=residual,
                )
        w = w + t * delta
    else:
        raise ConvergenceError("risk parity iteration cap reached", residual=residual)
    return WeightVector(w / w.sum())


def efficient_frontier(
    estimate: CovarianceEstimate, config: SolverConfig, points: int
) -> list[FrontierPoint]:
    """Frontier samples from the minimum-variance return up to max(mean).

    Each sample solves the target-return problem; entries are sorted by
    achieved return and stdev is non-decreasing along that sweep.
    """
    if points < 2:
        raise ValidationError("points must be >= 2")
    cov, mean, _ = _check_square(estimate)
    base = replace(config, target_return=None)
    w_mv = solve_min_variance(estimate, base)
    r_lo = float(np.asarray(w_mv) @ mean)
    r_hi = float(mean.max())
    out: list[FrontierPoint] = []
    for target in np.linspace(r_lo, r_hi, points):
        w = solve_min_variance(estimate, replace(config, target_return=float(target)))
        wv = np.asarray(w)
        out.append(
            FrontierPoint(
                expected_return=float(wv @ mean),
                stdev=math.sqrt(max(float(wv @ cov @ wv), 0.0)),
                weights=w,
            )
        )
    out.sort(key=lambda p: p.expected_return)
    return out
