"""Actor and twin critics: 32/64/32 hidden layers, batch-norm, ReLU.

All modules take pre-normalized inputs (holding/100, price/strike,
ttm/maturity) and run in float64 so exported weights reproduce the same
actions when replayed by the evaluator's float64 inference.
"""

from __future__ import annotations

import torch
import torch.nn as nn

HIDDEN = (32, 64, 32)


def _trunk(in_dim: int):
    layers = [nn.BatchNorm1d(in_dim)]
    prev = in_dim
    for width in HIDDEN:
        layers += [nn.Linear(prev, width), nn.BatchNorm1d(width), nn.ReLU()]
        prev = width
    return nn.Sequential(*layers), prev


class Actor(nn.Module):
    """Maps a normalized state to a holding in [0, 100] shares."""

    def __init__(self):
        super().__init__()
        self.trunk, width = _trunk(3)
        self.head = nn.Linear(width, 1)

    def forward(self, state):
        z = self.head(self.trunk(state))
        return 100.0 * torch.sigmoid(z).squeeze(-1)


class Critic(nn.Module):
    """Maps (normalized state, action/100) to a scalar estimate."""

    def __init__(self):
        super().__init__()
        self.trunk, width = _trunk(4)
        self.head = nn.Linear(width, 1)

    def forward(self, state, action):
        x = torch.cat([state, (action / 100.0).unsqueeze(-1)], dim=-1)
        return self.head(self.trunk(x)).squeeze(-1)
