"""Proximal policy optimization with a clipped surrogate objective."""

from __future__ import annotations

import math

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

__all__ = ["build_ppo", "ppo_update", "clipped_surrogate"]


def build_ppo(cfg: AgentConfig, obs_size: int, n_actions: int, rng) -> TrainedAgent:
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


def clipped_surrogate(policy, observations, actions, logp_old, adv, clip_epsilon) -> Tensor:
    """mean of min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv).

    ratio is exp(logp_new - logp_old); adv and logp_old are constants, so a
    sample whose ratio sits beyond the clip range with a favorable advantage
    contributes no gradient.
    """
    logp_new = policy.log_prob_t(observations, actions)
    ratio = (logp_new - Tensor(logp_old)).exp()
    adv_t = Tensor(adv)
    unclipped = ratio * adv_t
    clipped = ratio.clip(1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv_t
    return unclipped.minimum(clipped).mean()


def ppo_update(agent: TrainedAgent, rollout: Rollout, rng) -> dict[str, float]:
    """Several epochs of shuffled minibatch steps on one frozen rollout.

    The collection-time log-densities define the ratio denominator for the
    whole update; advantages use the pre-update critic. The actor maximizes
    the clipped surrogate plus an entropy bonus; the critic fits the n-step
    returns by mean squared error.
    """
    cfg = agent.config
    critic = agent.nets["critic"]
    policy = agent.policy

    bootstrap = float(critic.forward(rollout.final_observation[None, :])[0, 0])
    returns = nstep_returns(rollout.rewards, rollout.dones, cfg.gamma, bootstrap)
    values = critic.forward(rollout.observations).reshape(-1)
    adv = returns - values
    n_samples = len(rollout)

    entropy_const = 0.5 * agent.n_actions * (1.0 + math.log(2.0 * math.pi))
    actor_losses: list[float] = []
    critic_losses: list[float] = []
    for _ in range(cfg.epochs_per_rollout):
        order = rng.permutation(n_samples)
        for start in range(0, n_samples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            policy.zero_grad()
            surrogate = clipped_surrogate(
                policy,
                rollout.observations[idx],
                rollout.actions[idx],
                rollout.log_probs[idx],
                adv[idx],
                cfg.clip_epsilon,
            )
            entropy = policy.log_std_leaf.sum() + entropy_const
            actor_loss = -surrogate - cfg.entropy_bonus * entropy
            backward(actor_loss)
            agent.optimizers["actor"].step(
                policy.mean_net.params, policy.mean_net.flat_grad()
            )
            log_std_grad = (
                np.zeros(agent.n_actions)
                if policy.log_std_leaf.grad is None
                else policy.log_std_leaf.grad
            )
            agent.optimizers["log_std"].step(policy.log_std, log_std_grad)
            policy.clamp()

            critic.zero_grad()
            value_t = critic.forward_t(rollout.observations[idx]).reshape(-1)
            critic_loss = ((Tensor(returns[idx]) - value_t) ** 2).mean()
            backward(critic_loss)
            agent.optimizers["critic"].step(critic.params, critic.flat_grad())

            actor_losses.append(float(actor_loss.data))
            critic_losses.append(float(critic_loss.data))

    return {
        "actor_loss": float(np.mean(actor_losses)),
        "critic_loss": float(np.mean(critic_losses)),
    }
