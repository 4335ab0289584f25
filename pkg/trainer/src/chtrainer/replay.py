"""Fixed-capacity transition store with uniform sampling."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, rng: np.random.Generator):
        self.capacity = int(capacity)
        self.rng = rng
        self.states = np.zeros((self.capacity, 3))
        self.actions = np.zeros(self.capacity)
        self.costs = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, 3))
        self.dones = np.zeros(self.capacity)
        self.size = 0
        self.pos = 0

    def push_batch(self, states, actions, costs, next_states, dones):
        n = len(actions)
        idx = (self.pos + np.arange(n)) % self.capacity
        self.states[idx] = states
        self.actions[idx] = actions
        self.costs[idx] = costs
        self.next_states[idx] = next_states
        self.dones[idx] = dones
        self.pos = int((self.pos + n) % self.capacity)
        self.size = int(min(self.size + n, self.capacity))

    def sample(self, batch_size: int):
        idx = self.rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.costs[idx],
                self.next_states[idx], self.dones[idx])

    def __len__(self):
        return self.size
