"""Fixed-capacity experience replay with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    features: np.ndarray       # (n, feature_dim)
    actions: np.ndarray        # (n,) int
    rewards: np.ndarray        # (n,)
    next_features: np.ndarray  # (n, feature_dim)
    terminal: np.ndarray       # (n,) bool


class ReplayBuffer:
    """Ring buffer: once full, the oldest transition is overwritten first.

    Storage grows geometrically up to capacity so small runs stay small.
    """

    def __init__(self, capacity: int, feature_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.feature_dim = feature_dim
        self._size = 0
        self._next = 0
        self._alloc = 0
        self._features = None
        self._actions = None
        self._rewards = None
        self._next_features = None
        self._terminal = None

    def __len__(self) -> int:
        return self._size

    def _grow(self, needed: int) -> None:
        new_alloc = max(1024, self._alloc * 2, needed)
        new_alloc = min(new_alloc, self.capacity)
        arrays = {
            "_features": (new_alloc, self.feature_dim),
            "_actions": (new_alloc,),
            "_rewards": (new_alloc,),
            "_next_features": (new_alloc, self.feature_dim),
            "_terminal": (new_alloc,),
        }
        for name, shape in arrays.items():
            dtype = np.int64 if name == "_actions" else (bool if name == "_terminal" else float)
            fresh = np.zeros(shape, dtype=dtype)
            old = getattr(self, name)
            if old is not None:
                fresh[:self._size] = old[:self._size]
            setattr(self, name, fresh)
        self._alloc = new_alloc

    def add(self, features, action: int, reward: float, next_features, terminal: bool) -> None:
        if self._next >= self._alloc and self._alloc < self.capacity:
            self._grow(self._next + 1)
        i = self._next
        self._features[i] = features
        self._actions[i] = action
        self._rewards[i] = reward
        self._next_features[i] = next_features
        self._terminal[i] = terminal
        self._size = min(self._size + 1, self.capacity)
        self._next = (self._next + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            features=self._features[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_features=self._next_features[idx],
            terminal=self._terminal[idx],
        )
