"""
File: core/replay_buffer.py
Location: aerobatic_rl/core/replay_buffer.py
Purpose: Fixed-capacity FIFO transition store for off-policy training
"""

import logging
from typing import NamedTuple

import numpy as np

from core.errors import ReplayBufferError

logger = logging.getLogger(__name__)


class Transition(NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class Batch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray


class ReplayBuffer:
    """
    Ring buffer of transitions

    Features:
    - Preallocated float64 storage
    - Oldest entry overwritten once full
    - Uniform sampling with replacement from a caller-supplied Generator
    """

    def __init__(self, capacity, obs_dim, action_dim):
        if capacity < 1:
            raise ReplayBufferError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.action_dim = action_dim

        self._obs = np.zeros((self.capacity, obs_dim))
        self._actions = np.zeros((self.capacity, action_dim))
        self._rewards = np.zeros(self.capacity)
        self._next_obs = np.zeros((self.capacity, obs_dim))
        self._dones = np.zeros(self.capacity)

        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, transition):
        """Store one Transition, evicting the oldest when full"""
        i = self._next
        self._obs[i] = transition.obs
        self._actions[i] = transition.action
        self._rewards[i] = transition.reward
        self._next_obs[i] = transition.next_obs
        self._dones[i] = 1.0 if transition.done else 0.0

        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        """
        Uniform sample with replacement

        Raises:
            ReplayBufferError: fewer stored transitions than batch_size
        """
        if self.size < batch_size:
            raise ReplayBufferError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return Batch(
            self._obs[idx].copy(),
            self._actions[idx].copy(),
            self._rewards[idx].copy(),
            self._next_obs[idx].copy(),
            self._dones[idx].copy(),
        )

    def transitions(self):
        """Stored transitions, oldest first"""
        start = self._next if self.size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self.size)]
        return [
            Transition(self._obs[i].copy(), self._actions[i].copy(), float(self._rewards[i]),
                       self._next_obs[i].copy(), bool(self._dones[i]))
            for i in order
        ]
