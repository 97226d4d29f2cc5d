"""Minimal neural toolkit: autodiff tensors, MLPs, Adam, replay buffer."""

from .autodiff import Tensor, backward, concat, softmax_t
from .buffer import ReplayBuffer, buffer_sample
from .nets import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    Adam,
    GaussianPolicy,
    Mlp,
    forward,
    gaussian_sample,
    load_checkpoint,
    load_vector,
    polyak_update,
    save_checkpoint,
    save_vector,
)

__all__ = [
    "Tensor",
    "backward",
    "concat",
    "softmax_t",
    "ReplayBuffer",
    "buffer_sample",
    "Adam",
    "GaussianPolicy",
    "Mlp",
    "forward",
    "gaussian_sample",
    "load_checkpoint",
    "load_vector",
    "polyak_update",
    "save_checkpoint",
    "save_vector",
    "LOG_STD_MIN",
    "LOG_STD_MAX",
]
