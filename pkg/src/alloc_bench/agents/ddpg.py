"""Deep deterministic policy gradient."""

from __future__ import annotations

import numpy as np

from ..neuro import Mlp, Tensor, backward, concat, polyak_update, softmax_t
from .base import (
    HIDDEN_SIZES,
    AgentConfig,
    TrainedAgent,
    new_adam,
    softmax_rows,
    stack_batch,
)

__all__ = ["build_ddpg", "ddpg_update"]


def build_ddpg(cfg: AgentConfig, obs_size: int, n_actions: int, rng) -> TrainedAgent:
    actor = Mlp((obs_size, *HIDDEN_SIZES, n_actions), rng=rng)
    critic = Mlp((obs_size + n_actions, *HIDDEN_SIZES, 1), rng=rng)
    agent = TrainedAgent(
        config=cfg,
        obs_size=obs_size,
        n_actions=n_actions,
        nets={
            "actor": actor,
            "critic": critic,
            "actor_target": actor.copy(),
            "critic_target": critic.copy(),
        },
    )
    agent.optimizers = {"actor": new_adam(actor), "critic": new_adam(critic)}
    return agent


def ddpg_update(agent: TrainedAgent, batch, rng=None, update_index: int = 0) -> dict[str, float]:
    """One critic regression step and one deterministic policy step.

    Critic target: y = r + gamma * (1 - done) * Q_target(s', mu_target(s')),
    with target actions pushed through the same softmax the environment
    applies. The actor ascends Q(s, softmax(mu(s))).
    """
    cfg = agent.config
    actor, critic = agent.nets["actor"], agent.nets["critic"]
    actor_t, critic_t = agent.nets["actor_target"], agent.nets["critic_target"]
    obs, actions, rewards, next_obs, dones = stack_batch(batch)

    w_next = softmax_rows(actor_t.forward(next_obs))
    q_next = critic_t.forward(np.concatenate([next_obs, w_next], axis=1)).reshape(-1)
    y = rewards + cfg.gamma * (1.0 - dones) * q_next

    critic.zero_grad()
    q = critic.forward_t(np.concatenate([obs, actions], axis=1)).reshape(-1)
    critic_loss = ((q - Tensor(y)) ** 2).mean()
    backward(critic_loss)
    agent.optimizers["critic"].step(critic.params, critic.flat_grad())

    actor.zero_grad()
    critic.zero_grad()
    mu = actor.forward_t(obs)
    q_pi = critic.forward_t(concat([Tensor(obs), softmax_t(mu)], axis=1)).reshape(-1)
    actor_loss = -q_pi.mean()
    backward(actor_loss)
    agent.optimizers["actor"].step(actor.params, actor.flat_grad())

    polyak_update(actor_t, actor, cfg.tau)
    polyak_update(critic_t, critic, cfg.tau)

    return {
        "critic_loss": float(critic_loss.data),
        "actor_loss": float(actor_loss.data),
    }
