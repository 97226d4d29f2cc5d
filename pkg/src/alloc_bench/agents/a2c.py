"""Single-worker advantage actor-critic."""

from __future__ import annotations

import numpy as np

from ..neuro import Tensor, backward
from .base import (
    AgentConfig,
    Rollout,
    TrainedAgent,
    make_policy_nets,
    new_adam,
    nstep_returns,
)

__all__ = ["build_a2c", "a2c_update"]


def build_a2c(cfg: AgentConfig, obs_size: int, n_actions: int, rng) -> TrainedAgent:
    policy, critic = make_policy_nets(cfg, obs_size, n_actions, rng)
    agent = TrainedAgent(
        config=cfg,
        obs_size=obs_size,
        n_actions=n_actions,
        nets={"actor": policy.mean_net, "critic": critic},
        policy=policy,
    )
    agent.optimizers = {
        "actor": new_adam(policy.mean_net),
        "log_std": new_adam(n_actions),
        "critic": new_adam(critic),
    }
    return agent


def a2c_update(agent: TrainedAgent, rollout: Rollout, rng=None) -> dict[str, float]:
    """One actor step and one critic step on an n-step rollout.

    Advantages are n-step returns minus the critic baseline and enter the
    actor loss as constants (stop-gradient): actor loss is
    -sum(logp * adv), critic loss sum(adv^2).
    """
    cfg = agent.config
    critic = agent.nets["critic"]
    policy = agent.policy

    bootstrap = float(critic.forward(rollout.final_observation[None, :])[0, 0])
    returns = nstep_returns(rollout.rewards, rollout.dones, cfg.gamma, bootstrap)
    values = critic.forward(rollout.observations).reshape(-1)
    adv = returns - values

    policy.zero_grad()
    logp = policy.log_prob_t(rollout.observations, rollout.actions)
    actor_loss = -(logp * Tensor(adv)).sum()
    backward(actor_loss)
    agent.optimizers["actor"].step(policy.mean_net.params, policy.mean_net.flat_grad())
    log_std_grad = (
        np.zeros(agent.n_actions)
        if policy.log_std_leaf.grad is None
        else policy.log_std_leaf.grad
    )
    agent.optimizers["log_std"].step(policy.log_std, log_std_grad)
    policy.clamp()

    critic.zero_grad()
    value_t = critic.forward_t(rollout.observations).reshape(-1)
    critic_loss = ((Tensor(returns) - value_t) ** 2).sum()
    backward(critic_loss)
    agent.optimizers["critic"].step(critic.params, critic.flat_grad())

    return {
        "actor_loss": float(actor_loss.data),
        "critic_loss": float(critic_loss.data),
    }
