"""Fixed-capacity replay memory of (state, rawAction, reward, nextState)."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, action_dim: int) -> None:
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_states = np.zeros((capacity, obs_dim), dtype=np.float32)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, state, action, reward, next_state) -> None:
        i = self._cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
        )

    def state_dict(self) -> dict:
        return {
            "states": self.states[: self._size].copy(),
            "actions": self.actions[: self._size].copy(),
            "rewards": self.rewards[: self._size].copy(),
            "next_states": self.next_states[: self._size].copy(),
            "cursor": self._cursor,
            "capacity": self.capacity,
        }

    def load_state_dict(self, payload: dict) -> None:
        if payload["capacity"] != self.capacity:
            raise ValueError("replay capacity mismatch between checkpoint and config")
        size = len(payload["states"])
        self.states[:size] = payload["states"]
        self.actions[:size] = payload["actions"]
        self.rewards[:size] = payload["rewards"]
        self.next_states[:size] = payload["next_states"]
        self._size = size
        self._cursor = payload["cursor"]
