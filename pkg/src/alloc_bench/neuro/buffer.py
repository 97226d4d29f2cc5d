"""Fixed-capacity FIFO replay buffer with uniform with-replacement sampling."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError

__all__ = ["ReplayBuffer", "buffer_sample"]


class ReplayBuffer:
    """Ring buffer: once full, each add overwrites the oldest entry."""

    def __init__(self, capacity: int):
        capacity = int(capacity)
        if capacity < 1:
            raise ValidationError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._storage)

    def add(self, item) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(item)
        else:
            self._storage[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        if batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self._storage:
            raise ValidationError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]


def buffer_sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> list:
    return buffer.sample(batch_size, rng)
