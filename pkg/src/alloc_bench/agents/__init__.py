"""Actor-critic agents trained against the portfolio environment."""

from __future__ import annotations

import numpy as np

from ..environment import EnvConfig, PortfolioEnv
from ..market_data import PriceFrame
from ..neuro import ReplayBuffer
from .a2c import a2c_update, build_a2c
from .base import (
    ALGORITHMS,
    ON_POLICY,
    AgentConfig,
    Rollout,
    TrainedAgent,
    act,
    advantage,
    train_off_policy,
    train_on_policy,
)
from .ddpg import build_ddpg, ddpg_update
from .ppo import build_ppo, clipped_surrogate, ppo_update
from .sac import build_sac, sac_update
from .td3 import build_td3, td3_update

__all__ = [
    "ALGORITHMS",
    "AgentConfig",
    "TrainedAgent",
    "Rollout",
    "act",
    "advantage",
    "train",
    "build_agent",
    "a2c_update",
    "ppo_update",
    "ddpg_update",
    "td3_update",
    "sac_update",
    "clipped_surrogate",
]

_BUILDERS = {
    "a2c": build_a2c,
    "ppo": build_ppo,
    "ddpg": build_ddpg,
    "td3": build_td3,
    "sac": build_sac,
}

_OFF_POLICY_UPDATES = {
    "ddpg": ddpg_update,
    "td3": td3_update,
    "sac": sac_update,
}


def build_agent(cfg: AgentConfig, obs_size: int, n_actions: int) -> TrainedAgent:
    """Freshly initialized agent with seed-determined parameters."""
    rng = np.random.default_rng(cfg.seed)
    return _BUILDERS[cfg.algorithm](cfg, obs_size, n_actions, rng)


def train(cfg: AgentConfig, frame: PriceFrame, env_cfg: EnvConfig = EnvConfig()) -> TrainedAgent:
    """Train one agent on repeated passes over the frame.

    An episode is one pass from day ``window`` to the last priced day;
    episodes repeat until cfg.total_steps environment steps have been taken.
    With total_steps=0 the freshly initialized agent is returned untouched.
    Identical seeds give bit-identical parameters.
    """
    rng = np.random.default_rng(cfg.seed)
    env = PortfolioEnv(frame, env_cfg)
    agent = _BUILDERS[cfg.algorithm](cfg, env.observation_size, env.n_assets, rng)
    if cfg.total_steps == 0:
        return agent
    if cfg.algorithm in ON_POLICY:
        update_fn = a2c_update if cfg.algorithm == "a2c" else ppo_update
        train_on_policy(agent, env, rng, update_fn)
    else:
        buffer = ReplayBuffer(cfg.buffer_capacity)
        train_off_policy(agent, env, rng, _OFF_POLICY_UPDATES[cfg.algorithm], buffer)
    return agent
