"""Portfolio allocation benchmark.

Classical mean-variance, risk-parity, and equal-weight strategies next to
five policy-gradient agents (A2C, PPO, DDPG, TD3, SAC) trained on a
transaction-cost-aware portfolio environment, with a shared walk-forward
evaluation protocol and reproducible reporting.
"""

from .agents import ALGORITHMS, AgentConfig, TrainedAgent, act, build_agent, train
from .backtest import (
    CLASSICAL_STRATEGIES,
    BacktestResult,
    ProtocolSummary,
    run_agent,
    run_classical,
    run_protocol,
)
from .classical import (
    SolverConfig,
    WeightVector,
    efficient_frontier,
    equal_weight,
    solve_min_variance,
    solve_risk_parity,
    solve_tangency,
)
from .environment import EnvConfig, EnvState, PortfolioEnv, Transition, run_episode
from .errors import (
    AllocBenchError,
    ConvergenceError,
    EpisodeEndedError,
    InfeasibleError,
    InsufficientDataError,
    NoTangencyError,
    NumericalError,
    ParseError,
    TrainingDivergedError,
    UndefinedMetricError,
    UsageError,
    ValidationError,
)
from .estimation import CovarianceEstimate, rolling_estimate
from .market_data import (
    PriceFrame,
    ReturnsFrame,
    SplitSpec,
    load_csv,
    split,
    synth_market,
    to_returns,
    write_csv,
)
from .metrics import MetricsReport, full_report

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ALGORITHMS",
    "CLASSICAL_STRATEGIES",
    "AgentConfig",
    "AllocBenchError",
    "BacktestResult",
    "ConvergenceError",
    "CovarianceEstimate",
    "EnvConfig",
    "EnvState",
    "EpisodeEndedError",
    "InfeasibleError",
    "InsufficientDataError",
    "MetricsReport",
    "NoTangencyError",
    "NumericalError",
    "ParseError",
    "PortfolioEnv",
    "PriceFrame",
    "ProtocolSummary",
    "ReturnsFrame",
    "SolverConfig",
    "SplitSpec",
    "TrainedAgent",
    "TrainingDivergedError",
    "Transition",
    "UndefinedMetricError",
    "UsageError",
    "ValidationError",
    "WeightVector",
    "act",
    "build_agent",
    "efficient_frontier",
    "equal_weight",
    "full_report",
    "load_csv",
    "rolling_estimate",
    "run_agent",
    "run_classical",
    "run_episode",
    "run_protocol",
    "solve_min_variance",
    "solve_risk_parity",
    "solve_tangency",
    "split",
    "synth_market",
    "to_returns",
    "train",
    "write_csv",
]
