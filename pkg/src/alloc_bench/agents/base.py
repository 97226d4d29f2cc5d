"""Shared agent plumbing: config, container, action selection, train loops.

All five algorithms use two-hidden-layer 64-unit tanh networks optimized by
Adam at 3e-4. On-policy methods (a2c, ppo) update once per collected
rollout; off-policy methods (ddpg, td3, sac) take one gradient update per
environment step after a 1000-step uniform-random warm-up. Any update loss
that goes non-finite or beyond 1e6 aborts training with
TrainingDivergedError carrying the seed and step index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..environment import PortfolioEnv
from ..errors import TrainingDivergedError, ValidationError
from ..neuro import (
    Adam,
    GaussianPolicy,
    Mlp,
    gaussian_sample,
    load_checkpoint,
    load_vector,
    save_checkpoint,
    save_vector,
)

__all__ = [
    "ALGORITHMS",
    "AgentConfig",
    "TrainedAgent",
    "Rollout",
    "act",
    "advantage",
    "HIDDEN_SIZES",
    "WARMUP_STEPS",
    "DIVERGENCE_LIMIT",
]

ALGORITHMS = ("a2c", "ppo", "ddpg", "td3", "sac")
ON_POLICY = ("a2c", "ppo")

HIDDEN_SIZES = (64, 64)
LEARNING_RATE = 3e-4
WARMUP_STEPS = 1000
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class AgentConfig:
    """Hyperparameters for one training run; fields unused by an algorithm
    are ignored by it."""

    algorithm: str
    seed: int = 0
    gamma: float = 0.99
    tau: float = 0.005
    rollout_length: int = 256
    clip_epsilon: float = 0.2
    epochs_per_rollout: int = 10
    buffer_capacity: int = 100_000
    batch_size: int = 64
    exploration_noise: float = 0.1
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    policy_delay: int = 2
    alpha: float = 0.2
    entropy_bonus: float = 0.01
    total_steps: int = 200_000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if not (0.0 <= self.gamma < 1.0):
            raise ValidationError(f"gamma must be in [0, 1), got {self.gamma}")
        if not (0.0 < self.tau <= 1.0):
            raise ValidationError(f"tau must be in (0, 1], got {self.tau}")
        if self.rollout_length < 1 or self.batch_size < 1 or self.buffer_capacity < 1:
            raise ValidationError("rollout_length, batch_size, buffer_capacity must be >= 1")
        if self.epochs_per_rollout < 1 or self.policy_delay < 1:
            raise ValidationError("epochs_per_rollout and policy_delay must be >= 1")
        if self.clip_epsilon <= 0.0:
            raise ValidationError("clip_epsilon must be positive")
        if min(self.exploration_noise, self.target_noise, self.target_noise_clip) < 0.0:
            raise ValidationError("noise magnitudes must be >= 0")
        if self.alpha < 0.0 or self.entropy_bonus < 0.0:
            raise ValidationError("entropy coefficients must be >= 0")
        if self.total_steps < 0:
            raise ValidationError("total_steps must be >= 0")


@dataclass
class TrainedAgent:
    """Networks plus optimizer state for one algorithm instance."""

    config: AgentConfig
    obs_size: int
    n_actions: int
    nets: dict[str, Mlp]
    policy: GaussianPolicy | None = None
    optimizers: dict[str, Adam] = field(default_factory=dict)
    training_log: list[tuple[int, float]] = field(default_factory=list)

    def actor_bytes(self) -> bytes:
        """Raw actor parameters, for determinism checks."""
        blob = self.nets["actor"].params.tobytes()
        if self.policy is not None:
            blob += self.policy.log_std.tobytes()
        return blob

    def save(self, directory) -> None:
        """Write every network (and log-stdev vector) via the checkpoint layout."""
        os.makedirs(directory, exist_ok=True)
        for name, net in self.nets.items():
            save_checkpoint(os.path.join(directory, f"{name}.ckpt"), net)
        if self.policy is not None:
            save_vector(os.path.join(directory, "log_std.ckpt"), self.policy.log_std)

    def load(self, directory) -> None:
        """Restore parameters saved by :meth:`save` into this architecture."""
        for name, net in self.nets.items():
            loaded = load_checkpoint(os.path.join(directory, f"{name}.ckpt"), net.activation)
            if loaded.sizes != net.sizes:
                raise ValidationError(
                    f"checkpoint {name} has sizes {loaded.sizes}, expected {net.sizes}"
                )
            net.params[:] = loaded.params
        if self.policy is not None:
            vec = load_vector(os.path.join(directory, "log_std.ckpt"))
            if vec.size != self.policy.log_std.size:
                raise ValidationError("log_std checkpoint size mismatch")
            self.policy.log_std[:] = vec
            self.policy.clamp()


@dataclass
class Rollout:
    """One on-policy collection segment plus the observation after it."""

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    log_probs: np.ndarray
    final_observation: np.ndarray

    def __len__(self) -> int:
        return self.rewards.size


def advantage(q_value: float, v_value: float) -> float:
    """How much better one action is than the state's baseline value."""
    return q_value - v_value


def act(
    agent: TrainedAgent,
    observation: np.ndarray,
    greedy: bool = True,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Raw (pre-softmax) action for one observation.

    Greedy mode is deterministic: the Gaussian mean for a2c/ppo, the actor
    output for ddpg/td3, tanh of the mean for sac. Exploration requires rng.
    """
    obs = np.asarray(observation, dtype=np.float64)
    if obs.shape != (agent.obs_size,):
        raise ValidationError(f"observation shape {obs.shape}, expected ({agent.obs_size},)")
    algo = agent.config.algorithm
    if not greedy and rng is None:
        raise ValidationError("exploration requires a random generator")
    if algo in ("a2c", "ppo"):
        mu = agent.policy.mean(obs)
        if greedy:
            return mu
        return mu + agent.policy.std() * rng.standard_normal(agent.n_actions)
    if algo in ("ddpg", "td3"):
        mu = agent.nets["actor"].forward(obs)
        if greedy:
            return mu
        return mu + agent.config.exploration_noise * rng.standard_normal(agent.n_actions)
    mu = agent.policy.mean(obs)
    if greedy:
        return np.tanh(mu)
    std = agent.policy.std()
    return np.tanh(mu + std * rng.standard_normal(agent.n_actions))


def softmax_rows(raw: np.ndarray) -> np.ndarray:
    """Row-wise stabilized softmax for batched raw actions."""
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def nstep_returns(
    rewards: np.ndarray, dones: np.ndarray, gamma: float, bootstrap: float
) -> np.ndarray:
    """Discounted returns with bootstrapping, reset at episode boundaries."""
    out = np.empty_like(rewards)
    acc = bootstrap
    for t in range(rewards.size - 1, -1, -1):
        acc = rewards[t] + gamma * (1.0 - dones[t]) * acc
        out[t] = acc
    return out


def check_losses(losses: dict[str, float], step: int, seed: int) -> None:
    for name, value in losses.items():
        if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
            raise TrainingDivergedError(f"{name} = {value!r}", step=step, seed=seed)


def stack_batch(batch) -> tuple[np.ndarray, ...]:
    """Transition list -> (obs, action weights, rewards, next obs, dones)."""
    obs = np.stack([t.state.observation for t in batch])
    actions = np.stack([np.asarray(t.action) for t in batch])
    rewards = np.array([t.reward for t in batch])
    next_obs = np.stack([t.next_state.observation for t in batch])
    dones = np.array([1.0 if t.done else 0.0 for t in batch])
    return obs, actions, rewards, next_obs, dones


def make_policy_nets(
    cfg: AgentConfig, obs_size: int, n_actions: int, rng: np.random.Generator
) -> tuple[GaussianPolicy, Mlp]:
    """Gaussian actor plus state-value critic (a2c/ppo/sac actor half)."""
    actor = Mlp((obs_size, *HIDDEN_SIZES, n_actions), rng=rng)
    critic = Mlp((obs_size, *HIDDEN_SIZES, 1), rng=rng)
    return GaussianPolicy(actor), critic


def new_adam(net_or_size) -> Adam:
    size = net_or_size if isinstance(net_or_size, int) else net_or_size.n_params
    return Adam(size, lr=LEARNING_RATE)


def train_on_policy(agent: TrainedAgent, env: PortfolioEnv, rng, update_fn) -> None:
    cfg = agent.config
    state = env.reset()
    obs_buf: list[np.ndarray] = []
    act_buf: list[np.ndarray] = []
    rew_buf: list[float] = []
    done_buf: list[float] = []
    logp_buf: list[float] = []
    episode = 0
    episode_reward = 0.0
    for step in range(1, cfg.total_steps + 1):
        obs = state.observation
        action, logp = gaussian_sample(agent.policy, obs, rng)
        tr = env.step(state, action)
        obs_buf.append(obs)
        act_buf.append(action)
        rew_buf.append(tr.reward)
        done_buf.append(1.0 if tr.done else 0.0)
        logp_buf.append(logp)
        episode_reward += tr.reward
        if tr.done:
            agent.training_log.append((episode, episode_reward))
            episode += 1
            episode_reward = 0.0
            state = env.reset()
        else:
            state = tr.next_state
        if len(rew_buf) == cfg.rollout_length or step == cfg.total_steps:
            rollout = Rollout(
                observations=np.stack(obs_buf),
                actions=np.stack(act_buf),
                rewards=np.array(rew_buf),
                dones=np.array(done_buf),
                log_probs=np.array(logp_buf),
                final_observation=state.observation,
            )
            losses = update_fn(agent, rollout, rng=rng)
            check_losses(losses, step=step, seed=cfg.seed)
            obs_buf, act_buf, rew_buf, done_buf, logp_buf = [], [], [], [], []


def train_off_policy(agent: TrainedAgent, env: PortfolioEnv, rng, update_fn, buffer) -> None:
    cfg = agent.config
    state = env.reset()
    episode = 0
    episode_reward = 0.0
    update_index = 0
    for step in range(1, cfg.total_steps + 1):
        obs = state.observation
        if step <= WARMUP_STEPS:
            raw = rng.standard_normal(agent.n_actions)
        else:
            raw = act(agent, obs, greedy=False, rng=rng)
        tr = env.step(state, raw)
        buffer.add(tr)
        episode_reward += tr.reward
        if tr.done:
            agent.training_log.append((episode, episode_reward))
            episode += 1
            episode_reward = 0.0
            state = env.reset()
        else:
            state = tr.next_state
        if step > WARMUP_STEPS and len(buffer) >= cfg.batch_size:
            batch = buffer.sample(cfg.batch_size, rng)
            losses = update_fn(agent, batch, rng=rng, update_index=update_index)
            update_index += 1
            check_losses(losses, step=step, seed=cfg.seed)
