"""Soft actor-critic with a fixed entropy temperature."""

from __future__ import annotations

import math

import numpy as np

from ..neuro import Mlp, Tensor, backward, concat, polyak_update, softmax_t
from .base import (
    HIDDEN_SIZES,
    AgentConfig,
    TrainedAgent,
    make_policy_nets,
    new_adam,
    softmax_rows,
    stack_batch,
)
from ..neuro.nets import SQUASH_EPS

__all__ = ["build_sac", "sac_update"]


def build_sac(cfg: AgentConfig, obs_size: int, n_actions: int, rng) -> TrainedAgent:
    policy, _ = make_policy_nets(cfg, obs_size, n_actions, rng)
    critic_1 = Mlp((obs_size + n_actions, *HIDDEN_SIZES, 1), rng=rng)
    critic_2 = Mlp((obs_size + n_actions, *HIDDEN_SIZES, 1), rng=rng)
    agent = TrainedAgent(
        config=cfg,
        obs_size=obs_size,
        n_actions=n_actions,
        nets={
            "actor": policy.mean_net,
            "critic_1": critic_1,
            "critic_2": critic_2,
            "critic_1_target": critic_1.copy(),
            "critic_2_target": critic_2.copy(),
        },
        policy=policy,
    )
    agent.optimizers = {
        "actor": new_adam(policy.mean_net),
        "log_std": new_adam(n_actions),
        "critic_1": new_adam(critic_1),
        "critic_2": new_adam(critic_2),
    }
    return agent


def _squashed_sample_numpy(policy, obs: np.ndarray, eps: np.ndarray):
    """Tanh-squashed sample and its log-density without building a graph."""
    mu = policy.mean_net.forward(obs)
    std = policy.std()
    pre = mu + std * eps
    squashed = np.tanh(pre)
    n = eps.shape[1]
    logp = (
        -0.5 * (eps * eps).sum(axis=1)
        - policy.log_std.sum()
        - 0.5 * n * math.log(2.0 * math.pi)
        - np.log(1.0 - squashed * squashed + SQUASH_EPS).sum(axis=1)
    )
    return squashed, logp


def sac_update(agent: TrainedAgent, batch, rng, update_index: int = 0) -> dict[str, float]:
    """Entropy-regularized twin-critic update with a reparameterized actor.

    Critic target: y = r + gamma * (1 - done) *
        (min_i Q_i_target(s', a') - alpha * logp(a'|s'))
    with a' freshly squashed-sampled at s'. The actor minimizes
    mean(alpha * logp(a|s) - min_i Q_i(s, a)) through the reparameterization;
    only the critic targets use Polyak averaging (there is no target actor).
    """
    cfg = agent.config
    policy = agent.policy
    critic_1, critic_2 = agent.nets["critic_1"], agent.nets["critic_2"]
    critic_1_t, critic_2_t = agent.nets["critic_1_target"], agent.nets["critic_2_target"]
    obs, actions, rewards, next_obs, dones = stack_batch(batch)
    batch_size = obs.shape[0]

    eps_next = rng.standard_normal((batch_size, agent.n_actions))
    a_next, logp_next = _squashed_sample_numpy(policy, next_obs, eps_next)
    w_next = softmax_rows(a_next)
    critic_in_next = np.concatenate([next_obs, w_next], axis=1)
    q_next = np.minimum(
        critic_1_t.forward(critic_in_next).reshape(-1),
        critic_2_t.forward(critic_in_next).reshape(-1),
    )
    y = rewards + cfg.gamma * (1.0 - dones) * (q_next - cfg.alpha * logp_next)

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

    policy.zero_grad()
    critic_1.zero_grad()
    critic_2.zero_grad()
    eps = rng.standard_normal((batch_size, agent.n_actions))
    a_t, logp_t = policy.rsample_squashed_t(obs, eps)
    critic_in_pi = concat([Tensor(obs), softmax_t(a_t)], axis=1)
    q_pi = critic_1.forward_t(critic_in_pi).minimum(critic_2.forward_t(critic_in_pi))
    actor_loss = (logp_t * cfg.alpha - q_pi.reshape(-1)).mean()
    backward(actor_loss)
    agent.optimizers["actor"].step(policy.mean_net.params, policy.mean_net.flat_grad())
    log_std_grad = (
        np.zeros(agent.n_actions)
        if policy.log_std_leaf.grad is None
        else policy.log_std_leaf.grad
    )
    agent.optimizers["log_std"].step(policy.log_std, log_std_grad)
    policy.clamp()

    polyak_update(critic_1_t, critic_1, cfg.tau)
    polyak_update(critic_2_t, critic_2, cfg.tau)

    return {
        "critic_1_loss": float(loss_1.data),
        "critic_2_loss": float(loss_2.data),
        "actor_loss": float(actor_loss.data),
    }
