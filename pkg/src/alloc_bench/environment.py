"""Daily-rebalanced portfolio environment with proportional transaction costs.

One episode walks a price frame from day ``window`` to the final priced day.
The observation is a flat vector ``[value / initial_value, price relatives
for the last `window` days (oldest first), current weights]``. Raw actions
are mapped through a numerically stabilized softmax onto the simplex, the
portfolio is rebalanced at the same day's close, costs are charged on traded
value, and the next day's returns are applied:

    V[t+1] = (V[t] - cost[t]) * (1 + sum_i w_i r[t, i])

Rewards passed to agents are the one-day value change divided by
initial_value, which keeps them near 1e-3 for daily data. The environment
is fully deterministic; an instance is single-threaded and should drive one
episode at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classical import WeightVector
from .errors import EpisodeEndedError, InsufficientDataError, ValidationError
from .market_data import PriceFrame

__all__ = ["EnvConfig", "EnvState", "Transition", "PortfolioEnv", "softmax_weights", "run_episode"]


@dataclass(frozen=True)
class EnvConfig:
    initial_value: float = 1e6
    cost_rate: float = 0.001
    window: int = 1

    def __post_init__(self):
        if not (self.initial_value > 0.0) or not math.isfinite(self.initial_value):
            raise ValidationError("initial_value must be positive and finite")
        if not (0.0 <= self.cost_rate <= 0.1):
            raise ValidationError(f"cost_rate must be in [0, 0.1], got {self.cost_rate}")
        if self.window < 1:
            raise ValidationError("window must be >= 1")


@dataclass(frozen=True)
class EnvState:
    """Observation plus the bookkeeping it is derived from.

    value is the portfolio's currency value and weights the current
    holdings; both also appear (normalized) inside observation.
    """

    observation: np.ndarray
    day_index: int
    value: float
    weights: np.ndarray

    def __post_init__(self):
        obs = np.ascontiguousarray(np.asarray(self.observation, dtype=np.float64))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        obs.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "observation", obs)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class Transition:
    state: EnvState
    action: WeightVector
    reward: float
    next_state: EnvState
    done: bool


def softmax_weights(raw_action) -> np.ndarray:
    """Map an unconstrained action vector onto the simplex, max-shifted."""
    a = np.asarray(raw_action, dtype=np.float64)
    if a.ndim != 1:
        raise ValidationError(f"action must be a vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("non-finite action")
    e = np.exp(a - a.max())
    return e / e.sum()


class PortfolioEnv:
    """Deterministic single-episode market simulator over one price frame."""

    def __init__(self, frame: PriceFrame, config: EnvConfig = EnvConfig()):
        if frame.n_days < config.window + 2:
            raise InsufficientDataError(
                f"frame has {frame.n_days} rows; need at least window + 2 = {config.window + 2}"
            )
        self.frame = frame
        self.config = config
        # relatives[t] = prices[t] / prices[t-1], defined for t >= 1
        self._relatives = frame.prices[1:] / frame.prices[:-1]

    @property
    def n_assets(self) -> int:
        return self.frame.n_assets

    @property
    def observation_size(self) -> int:
        return 1 + (self.config.window + 1) * self.n_assets

    def _observe(self, day_index: int, value: float, weights: np.ndarray) -> np.ndarray:
        w = self.config.window
        rel = self._relatives[day_index - w : day_index].reshape(-1)
        return np.concatenate([[value / self.config.initial_value], rel, weights])

    def reset(self) -> EnvState:
        """Start an episode at day ``window`` with equal weights."""
        n = self.n_assets
        w0 = np.full(n, 1.0 / n)
        v0 = self.config.initial_value
        day = self.config.window
        return EnvState(
            observation=self._observe(day, v0, w0), day_index=day, value=v0, weights=w0
        )

    def is_done(self, state: EnvState) -> bool:
        return state.day_index >= self.frame.n_days - 1

    def step(self, state: EnvState, raw_action) -> Transition:
        """Rebalance at the close of state.day_index and advance one day."""
        if self.is_done(state):
            raise EpisodeEndedError(
                f"episode already ended at day index {state.day_index}"
            )
        w_new = softmax_weights(raw_action)
        if w_new.size != self.n_assets:
            raise ValidationError(
                f"action has {w_new.size} entries for {self.n_assets} assets"
            )
        t = state.day_index
        value = state.value
        traded = float(np.abs(w_new - state.weights).sum()) * value
        cost = self.config.cost_rate * traded
        invested = value - cost

        growth = self._relatives[t]  # prices[t+1] / prices[t]
        gross = float(w_new @ growth)
        next_value = invested * gross
        w_drift = w_new * growth / gross

        next_state = EnvState(
            observation=self._observe(t + 1, next_value, w_drift),
            day_index=t + 1,
            value=next_value,
            weights=w_drift,
        )
        reward = (next_value - value) / self.config.initial_value
        return Transition(
            state=state,
            action=WeightVector(w_new),
            reward=reward,
            next_state=next_state,
            done=self.is_done(next_state),
        )


def run_episode(frame: PriceFrame, config: EnvConfig, policy):
    """Drive one full episode with ``policy(observation) -> raw action``.

    Returns a BacktestResult whose equity curve is in currency, starting at
    initial_value on day ``window``.
    """
    from .backtest import BacktestResult

    env = PortfolioEnv(frame, config)
    state = env.reset()
    dates = [frame.dates[state.day_index]]
    equity = [state.value]
    weights_rows: list[np.ndarray] = []
    turnover: list[float] = []
    while not env.is_done(state):
        previous_weights = state.weights
        tr = env.step(state, policy(state.observation))
        chosen = np.asarray(tr.action)
        weights_rows.append(chosen)
        turnover.append(float(np.abs(chosen - previous_weights).sum()))
        state = tr.next_state
        dates.append(frame.dates[state.day_index])
        equity.append(state.value)
    equity_arr = np.asarray(equity)
    daily_returns = equity_arr[1:] / equity_arr[:-1] - 1.0
    return BacktestResult(
        dates=tuple(dates),
        equity=equity_arr,
        daily_returns=daily_returns,
        weights_history=np.vstack(weights_rows),
        turnover_history=np.asarray(turnover),
    )
