"""Walk-forward evaluation of classical strategies and trained agents.

Classical strategies re-estimate moments every day over a trailing window
of the test segment's own returns and trade at that day's close with no
transaction costs; a solver failure on one day falls back to the previous
day's weights (equal weights on the first day) and logs a warning. Agents
replay their environment greedily on the test segment, costs included.

run_protocol repeats each algorithm over consecutive seeds, scores runs by
test cumulative return, and keeps per-seed results plus best/worst/mean/stdev
summaries; failed runs are excluded from the statistics but counted.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import (
    SolverConfig,
    WeightVector,
    equal_weight,
    solve_min_variance,
    solve_risk_parity,
    solve_tangency,
)
from .environment import EnvConfig, run_episode
from .errors import (
    AllocBenchError,
    InsufficientDataError,
    ValidationError,
)
from .estimation import rolling_estimate
from .market_data import PriceFrame, SplitSpec, split, to_returns

__all__ = [
    "CLASSICAL_STRATEGIES",
    "BacktestResult",
    "RunRecord",
    "AlgorithmRuns",
    "ProtocolSummary",
    "run_classical",
    "run_agent",
    "run_protocol",
    "max_workers_from_env",
]

log = logging.getLogger(__name__)

CLASSICAL_STRATEGIES = ("tangency", "minvariance", "riskparity", "equalweight")
THREADS_ENV_VAR = "ALLOC_BENCH_THREADS"


@dataclass(frozen=True)
class BacktestResult:
    """One strategy's walk over one segment.

    equity has one more entry than the daily series; daily_returns[t] is
    equity[t+1]/equity[t] - 1, weights_history[t] the allocation chosen at
    date t, and turnover_history[t] the L1 weight change traded that day
    (1.0 on a classical strategy's first day: full deployment).
    """

    dates: tuple
    equity: np.ndarray
    daily_returns: np.ndarray
    weights_history: np.ndarray
    turnover_history: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if not (
            self.equity.shape == (n,)
            and self.daily_returns.shape == (n - 1,)
            and self.weights_history.shape[0] == n - 1
            and self.turnover_history.shape == (n - 1,)
        ):
            raise ValidationError("inconsistent backtest series lengths")

    @property
    def cumulative_return(self) -> float:
        return float(self.equity[-1] / self.equity[0] - 1.0)


def _solve_strategy(strategy: str, estimate, solver_cfg: SolverConfig) -> WeightVector:
    if strategy == "equalweight":
        return equal_weight(estimate.n_assets)
    if strategy == "minvariance":
        return solve_min_variance(estimate, solver_cfg)
    if strategy == "tangency":
        return solve_tangency(estimate, solver_cfg)
    if strategy == "riskparity":
        return solve_risk_parity(estimate, solver_cfg)
    raise ValidationError(
        f"unknown classical strategy {strategy!r}; valid: {CLASSICAL_STRATEGIES}"
    )


def run_classical(
    frame: PriceFrame,
    strategy: str,
    window: int = 50,
    solver_cfg: SolverConfig = SolverConfig(),
) -> BacktestResult:
    """Daily re-estimated, cost-free walk of one classical strategy."""
    if strategy not in CLASSICAL_STRATEGIES:
        raise ValidationError(
            f"unknown classical strategy {strategy!r}; valid: {CLASSICAL_STRATEGIES}"
        )
    if frame.n_days < window + 2:
        raise InsufficientDataError(
            f"frame has {frame.n_days} rows; need at least window + 2 = {window + 2}"
        )
    returns = to_returns(frame)
    rets = returns.returns
    previous: np.ndarray | None = None
    daily: list[float] = []
    weights_rows: list[np.ndarray] = []
    turnover: list[float] = []
    for t in range(window, frame.n_days - 1):
        estimate = rolling_estimate(returns, end_index=t, window=window)
        try:
            w = np.asarray(_solve_strategy(strategy, estimate, solver_cfg))
        except AllocBenchError as exc:
            fallback = previous if previous is not None else np.asarray(equal_weight(frame.n_assets))
            log.warning(
                "%s solve failed on %s (%s); holding %s weights",
                strategy,
                frame.dates[t],
                exc,
                "previous" if previous is not None else "equal",
            )
            w = fallback
        if previous is None:
            turnover.append(1.0)  # initial deployment from cash
        else:
            drifted = previous * (1.0 + rets[t - 1]) / (1.0 + float(previous @ rets[t - 1]))
            turnover.append(float(np.abs(w - drifted).sum()))
        day_return = float(w @ rets[t])
        daily.append(day_return)
        weights_rows.append(w)
        previous = w
    daily_arr = np.asarray(daily)
    equity = np.concatenate([[1.0], np.cumprod(1.0 + daily_arr)])
    return BacktestResult(
        dates=tuple(frame.dates[window:]),
        equity=equity,
        daily_returns=daily_arr,
        weights_history=np.vstack(weights_rows),
        turnover_history=np.asarray(turnover),
    )


def run_agent(agent, frame: PriceFrame, env_cfg: EnvConfig = EnvConfig()) -> BacktestResult:
    """Greedy deterministic episode of a trained agent over the frame."""
    from .agents import act

    return run_episode(frame, env_cfg, lambda obs: act(agent, obs, greedy=True))


@dataclass(frozen=True)
class RunRecord:
    seed: int
    cumulative_return: float
    result: BacktestResult


@dataclass
class AlgorithmRuns:
    """All seeded runs of one algorithm plus summary statistics."""

    algorithm: str
    runs: list[RunRecord] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def best(self) -> RunRecord | None:
        return max(self.runs, key=lambda r: r.cumulative_return) if self.runs else None

    @property
    def worst(self) -> RunRecord | None:
        return min(self.runs, key=lambda r: r.cumulative_return) if self.runs else None

    @property
    def mean_cumulative(self) -> float | None:
        if not self.runs:
            return None
        return float(np.mean([r.cumulative_return for r in self.runs]))

    @property
    def stdev_cumulative(self) -> float | None:
        if not self.runs:
            return None
        if len(self.runs) < 2:
            return 0.0
        return float(np.std([r.cumulative_return for r in self.runs], ddof=1))


@dataclass
class ProtocolSummary:
    classical: dict[str, BacktestResult]
    algorithms: dict[str, AlgorithmRuns]
    n_runs: int


def max_workers_from_env(default: int = 1) -> int:
    """Worker-process cap for run_protocol, from ALLOC_BENCH_THREADS."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


def _train_and_score(args):
    """Worker for one (algorithm, seed) task; returns a tagged outcome tuple."""
    cfg, train_frame, test_frame, env_cfg = args
    from .agents import train

    try:
        agent = train(cfg, train_frame, env_cfg)
        result = run_agent(agent, test_frame, env_cfg)
        return (cfg.algorithm, cfg.seed, "ok", result)
    except AllocBenchError as exc:
        return (cfg.algorithm, cfg.seed, "failed", str(exc))


def run_protocol(
    frame: PriceFrame,
    split_spec: SplitSpec,
    agent_cfgs,
    n_runs: int = 10,
    env_cfg: EnvConfig = EnvConfig(),
    solver_cfg: SolverConfig = SolverConfig(),
    classical_window: int = 50,
    classical_strategies=CLASSICAL_STRATEGIES,
    max_workers: int | None = None,
) -> ProtocolSummary:
    """Full comparison: classical strategies plus n_runs seeds per algorithm.

    Each agent config's seed is the base of its arithmetic seed sequence
    (seed, seed+1, ..., seed+n_runs-1). Tasks fan out over worker processes
    when max_workers (default: the ALLOC_BENCH_THREADS variable, else 1)
    exceeds one; results are keyed by (algorithm, seed) so the summary does
    not depend on completion order.
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    algorithms = [cfg.algorithm for cfg in agent_cfgs]
    if len(set(algorithms)) != len(algorithms):
        raise ValidationError("duplicate algorithm in agent_cfgs")
    train_frame, test_frame = split(frame, split_spec)

    classical = {
        name: run_classical(test_frame, name, classical_window, solver_cfg)
        for name in classical_strategies
    }

    tasks = [
        (replace(cfg, seed=cfg.seed + k), train_frame, test_frame, env_cfg)
        for cfg in agent_cfgs
        for k in range(n_runs)
    ]
    workers = max_workers_from_env() if max_workers is None else max_workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            outcomes = list(pool.map(_train_and_score, tasks))
    else:
        outcomes = [_train_and_score(task) for task in tasks]

    by_key = {(algo, seed): (status, payload) for algo, seed, status, payload in outcomes}
    summary: dict[str, AlgorithmRuns] = {}
    for cfg in agent_cfgs:
        runs = AlgorithmRuns(algorithm=cfg.algorithm)
        for k in range(n_runs):
            seed = cfg.seed + k
            status, payload = by_key[(cfg.algorithm, seed)]
            if status == "ok":
                runs.runs.append(
                    RunRecord(
                        seed=seed,
                        cumulative_return=payload.cumulative_return,
                        result=payload,
                    )
                )
            else:
                log.warning("%s run with seed %d failed: %s", cfg.algorithm, seed, payload)
                runs.failures.append((seed, payload))
        summary[cfg.algorithm] = runs
    return ProtocolSummary(classical=classical, algorithms=summary, n_runs=n_runs)
