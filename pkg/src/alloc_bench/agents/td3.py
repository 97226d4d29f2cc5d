"""Twin delayed deep deterministic policy gradient."""

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

__all__ = ["build_td3", "td3_update"]


def build_td3(cfg: AgentConfig, obs_size: int, n_actions: int, rng) -> TrainedAgent:
    actor = Mlp((obs_size, *HIDDEN_SIZES, n_actions), rng=rng)
    critic_1 = Mlp((obs_size + n_actions, *HIDDEN_SIZES, 1), rng=rng)
    critic_2 = Mlp((obs_size + n_actions, *HIDDEN_SIZES, 1), rng=rng)
    agent = TrainedAgent(
        config=cfg,
        obs_size=obs_size,
        n_actions=n_actions,
        nets={
            "actor": actor,
            "critic_1": critic_1,
            "critic_2": critic_2,
            "actor_target": actor.copy(),
            "critic_1_target": critic_1.copy(),
            "critic_2_target": critic_2.copy(),
        },
    )
    agent.optimizers = {
        "actor": new_adam(actor),
        "critic_1": new_adam(critic_1),
        "critic_2": new_adam(critic_2),
    }
    return agent


def td3_update(agent: TrainedAgent, batch, rng, update_index: int) -> dict[str, float]:
    """Twin-critic regression every call; delayed actor and target updates.

    Target actions get clipped Gaussian smoothing noise before the softmax;
    both critics regress on the elementwise minimum of the target critics.
    The actor (through critic 1) and all three targets update only when
    update_index is a multiple of policy_delay.
    """
    cfg = agent.config
    actor = agent.nets["actor"]
    critic_1, critic_2 = agent.nets["critic_1"], agent.nets["critic_2"]
    actor_t = agent.nets["actor_target"]
    critic_1_t, critic_2_t = agent.nets["critic_1_target"], agent.nets["critic_2_target"]
    obs, actions, rewards, next_obs, dones = stack_batch(batch)

    noise = np.clip(
        cfg.target_noise * rng.standard_normal((obs.shape[0], agent.n_actions)),
        -cfg.target_noise_clip,
        cfg.target_noise_clip,
    )
    w_next = softmax_rows(actor_t.forward(next_obs) + noise)
    critic_in_next = np.concatenate([next_obs, w_next], axis=1)
    q_next = np.minimum(
        critic_1_t.forward(critic_in_next).reshape(-1),
        critic_2_t.forward(critic_in_next).reshape(-1),
    )
    y = rewards + cfg.gamma * (1.0 - dones) * q_next

    critic_in = np.concatenate([obs, actions], axis=1)
    y_t = Tensor(y)
    critic_1.zero_grad()
    critic_2.zero_grad()
    q1 = critic_1.forward_t(critic_in).reshape(-1)
    q2 = critic_2.forward_t(critic_in).reshape(-1)
    loss_1 = ((q1 - y_t) ** 2).mean()
    loss_2 = ((q2 - y_t) ** 2).mean()
    backward(loss_1)
    backward(loss_2)
    agent.optimizers["critic_1"].step(critic_1.params, critic_1.flat_grad())
    agent.optimizers["critic_2"].step(critic_2.params, critic_2.flat_grad())

    losses = {
        "critic_1_loss": float(loss_1.data),
        "critic_2_loss": float(loss_2.data),
    }
    if update_index % cfg.policy_delay == 0:
        actor.zero_grad()
        critic_1.zero_grad()
        mu = actor.forward_t(obs)
        q_pi = critic_1.forward_t(concat([Tensor(obs), softmax_t(mu)], axis=1)).reshape(-1)
        actor_loss = -q_pi.mean()
        backward(actor_loss)
        agent.optimizers["actor"].step(actor.params, actor.flat_grad())
        polyak_update(actor_t, actor, cfg.tau)
        polyak_update(critic_1_t, critic_1, cfg.tau)
        polyak_update(critic_2_t, critic_2, cfg.tau)
        losses["actor_loss"] = float(actor_loss.data)
    return losses
