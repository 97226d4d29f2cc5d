"""Dense networks, Gaussian policy head, Adam, and checkpoint byte format.

An Mlp owns a single flat float64 parameter vector; per-layer weight and
bias tensors are zero-copy views into it, so in-place optimizer updates are
immediately visible to the autodiff leaves.

Checkpoint byte layout (little-endian throughout):

    uint32   L                  number of size entries
    uint32*L sizes
    float64* payload            the flat parameter vector

With L >= 2 the file is an Mlp whose layer widths are ``sizes`` and whose
payload length is sum((sizes[i] + 1) * sizes[i+1]); with L == 1 it is a bare
parameter vector of length sizes[0] (used for policy log-stdev vectors).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ParseError, ValidationError
from .autodiff import Tensor

__all__ = [
    "Mlp",
    "GaussianPolicy",
    "Adam",
    "forward",
    "polyak_update",
    "gaussian_sample",
    "save_checkpoint",
    "load_checkpoint",
    "save_vector",
    "load_vector",
    "LOG_STD_MIN",
    "LOG_STD_MAX",
]

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
# Keeps the tanh change-of-variables log-density finite at saturation.
SQUASH_EPS = 1e-6

_ACTIVATIONS = ("tanh", "relu", "identity")


class Mlp:
    """Fully connected network with a shared nonlinearity and linear output.

    Weights are initialized uniformly in +-sqrt(6 / (fan_in + fan_out)) from
    the given generator; biases start at zero. With rng=None all parameters
    start at zero, which makes the softmax of the output the equal-weight
    portfolio.
    """

    def __init__(self, sizes, activation: str = "tanh", rng: np.random.Generator | None = None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValidationError(f"sizes must be >= 2 positive widths, got {sizes}")
        if activation not in _ACTIVATIONS:
            raise ValidationError(f"activation must be one of {_ACTIVATIONS}, got {activation!r}")
        self.sizes = sizes
        self.activation = activation
        self.params = np.zeros(sum((i + 1) * o for i, o in zip(sizes, sizes[1:])))
        self._layers: list[tuple[np.ndarray, np.ndarray]] = []
        offset = 0
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            w = self.params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.params[offset : offset + fan_out]
            offset += fan_out
            self._layers.append((w, b))
        if rng is not None:
            for w, _ in self._layers:
                limit = math.sqrt(6.0 / (w.shape[0] + w.shape[1]))
                w[:] = rng.uniform(-limit, limit, size=w.shape)
        self._leaves = [
            (Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))
            for w, b in self._layers
        ]

    @property
    def n_params(self) -> int:
        return self.params.size

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass; no graph is recorded."""
        h = np.asarray(x, dtype=np.float64)
        last = len(self._layers) - 1
        for i, (w, b) in enumerate(self._layers):
            h = h @ w + b
            if i != last:
                if self.activation == "tanh":
                    h = np.tanh(h)
                elif self.activation == "relu":
                    h = np.maximum(h, 0.0)
        return h

    def forward_t(self, x) -> Tensor:
        """Graph-recording forward pass for training updates."""
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        last = len(self._leaves) - 1
        for i, (w, b) in enumerate(self._leaves):
            h = h @ w + b
            if i != last:
                if self.activation == "tanh":
                    h = h.tanh()
                elif self.activation == "relu":
                    h = h.relu()
        return h

    def zero_grad(self) -> None:
        for w, b in self._leaves:
            w.grad = None
            b.grad = None

    def flat_grad(self) -> np.ndarray:
        """Concatenated parameter gradient, zeros where nothing flowed."""
        parts = []
        for (w_leaf, b_leaf), (w, b) in zip(self._leaves, self._layers):
            parts.append(np.zeros(w.size) if w_leaf.grad is None else w_leaf.grad.reshape(-1))
            parts.append(np.zeros(b.size) if b_leaf.grad is None else b_leaf.grad)
        return np.concatenate(parts)

    def copy(self) -> "Mlp":
        clone = Mlp(self.sizes, activation=self.activation)
        clone.params[:] = self.params
        return clone


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


class GaussianPolicy:
    """Diagonal Gaussian: state-dependent mean net, learned global log-stdev.

    The log-stdev vector is clamped to [-20, 2] after every optimizer step
    via clamp(). Sampling is reparameterized: action = mean + stdev * eps.
    """

    def __init__(self, mean_net: Mlp, log_std_init: float = 0.0):
        self.mean_net = mean_net
        n = mean_net.sizes[-1]
        self.log_std = np.full(n, float(np.clip(log_std_init, LOG_STD_MIN, LOG_STD_MAX)))
        self.log_std_leaf = Tensor(self.log_std, requires_grad=True)

    @property
    def n_actions(self) -> int:
        return self.log_std.size

    def clamp(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return self.mean_net.forward(obs)

    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def entropy(self) -> float:
        """Analytic differential entropy of the unsquashed Gaussian."""
        n = self.n_actions
        return float(self.log_std.sum() + 0.5 * n * (1.0 + math.log(2.0 * math.pi)))

    def log_prob(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Exact unsquashed log-density, numpy path; batched rows."""
        mu = self.mean_net.forward(np.atleast_2d(obs))
        a = np.atleast_2d(actions)
        std = self.std()
        z = (a - mu) / std
        return (
            -0.5 * (z * z).sum(axis=1)
            - self.log_std.sum()
            - 0.5 * a.shape[1] * math.log(2.0 * math.pi)
        )

    def zero_grad(self) -> None:
        self.mean_net.zero_grad()
        self.log_std_leaf.grad = None

    # graph-building pieces used by the policy-gradient updates

    def log_prob_t(self, obs_batch: np.ndarray, actions: np.ndarray) -> Tensor:
        """Log-density of fixed actions with gradients to mean net and log-std."""
        mu = self.mean_net.forward_t(obs_batch)
        log_std = self.log_std_leaf
        a = Tensor(np.asarray(actions, dtype=np.float64))
        z = (a - mu) * (-log_std).exp()
        n = self.n_actions
        return (
            (z * z).sum(axis=1) * -0.5
            - log_std.sum()
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def rsample_t(self, obs_batch: np.ndarray, eps: np.ndarray) -> tuple[Tensor, Tensor]:
        """Reparameterized unsquashed sample and its log-density."""
        mu = self.mean_net.forward_t(obs_batch)
        log_std = self.log_std_leaf
        action = mu + Tensor(eps) * log_std.exp()
        z = Tensor(eps)
        n = self.n_actions
        logp = (z * z).sum(axis=1) * -0.5 - log_std.sum() - 0.5 * n * math.log(2.0 * math.pi)
        return action, logp

    def rsample_squashed_t(self, obs_batch: np.ndarray, eps: np.ndarray) -> tuple[Tensor, Tensor]:
        """Tanh-squashed reparameterized sample with the change-of-variables
        correction on the log-density."""
        pre, logp = self.rsample_t(obs_batch, eps)
        squashed = pre.tanh()
        correction = (1.0 - squashed * squashed + SQUASH_EPS).log().sum(axis=1)
        return squashed, logp - correction


def gaussian_sample(
    policy: GaussianPolicy, obs: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Draw one unsquashed action for a single observation; returns (action, logp)."""
    mu = policy.mean(obs)
    std = policy.std()
    eps = rng.standard_normal(policy.n_actions)
    action = mu + std * eps
    logp = float(policy.log_prob(obs, action)[0])
    return action, logp


class Adam:
    """Adaptive moment estimation on a flat parameter vector, in place."""

    def __init__(
        self,
        n_params: int,
        lr: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if n_params < 1:
            raise ValidationError("n_params must be >= 1")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if params.shape != self.m.shape or grad.shape != self.m.shape:
            raise ValidationError("parameter/gradient size mismatch in Adam step")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def polyak_update(target_net: Mlp, online_net: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if target_net.sizes != online_net.sizes or target_net.activation != online_net.activation:
        raise ValidationError("polyak update requires identical architectures")
    if not (0.0 <= tau <= 1.0):
        raise ValidationError(f"tau must be in [0, 1], got {tau}")
    target_net.params *= 1.0 - tau
    target_net.params += tau * online_net.params


# checkpoint i/o ----------------------------------------------------------


def _write_blob(path, sizes: tuple[int, ...], payload: np.ndarray) -> None:
    header = np.array([len(sizes), *sizes], dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(payload.astype("<f8").tobytes())


def _read_blob(path) -> tuple[tuple[int, ...], np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ParseError("checkpoint too short for a header")
    count = int(np.frombuffer(raw[:4], dtype="<u4")[0])
    if count < 1 or len(raw) < 4 + 4 * count:
        raise ParseError("checkpoint header truncated")
    sizes = tuple(int(s) for s in np.frombuffer(raw[4 : 4 + 4 * count], dtype="<u4"))
    payload = np.frombuffer(raw[4 + 4 * count :], dtype="<f8").copy()
    return sizes, payload


def save_checkpoint(path, net: Mlp) -> None:
    _write_blob(path, net.sizes, net.params)


def load_checkpoint(path, activation: str = "tanh") -> Mlp:
    sizes, payload = _read_blob(path)
    if len(sizes) < 2:
        raise ParseError(f"expected an Mlp checkpoint with >= 2 sizes, got {sizes}")
    net = Mlp(sizes, activation=activation)
    if payload.size != net.n_params:
        raise ParseError(
            f"checkpoint payload has {payload.size} parameters, sizes {sizes} imply {net.n_params}"
        )
    net.params[:] = payload
    return net


def save_vector(path, vec: np.ndarray) -> None:
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    _write_blob(path, (v.size,), v)


def load_vector(path) -> np.ndarray:
    sizes, payload = _read_blob(path)
    if len(sizes) != 1:
        raise ParseError(f"expected a bare vector checkpoint, got sizes {sizes}")
    if payload.size != sizes[0]:
        raise ParseError(f"vector payload has {payload.size} entries, header says {sizes[0]}")
    return payload
