"""Hedging episode mechanics, re-implemented to the evaluator's conventions.

Per-step reward for the short-call book with holding H carried into the step,
action a setting the next holding (traded at the next close S'):

    R = -(V' - V) + H (S' - S) - pi |S' (a - H)|

with V the Black-Scholes call value per contract (100 shares).  On the step
that reaches maturity the option settles at intrinsic value and the position
is liquidated to zero with costs.  Training works with costs c = -R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def norm_cdf(x):
    out = np.empty_like(np.asarray(x, dtype=float))
    flat = np.asarray(x, dtype=float).ravel()
    res = out.ravel()
    for i in range(flat.size):
        res[i] = 0.5 * (1.0 + math.erf(flat[i] / math.sqrt(2.0)))
    return out


def call_price(spot, strike, rate, vol, ttm):
    spot = np.asarray(spot, dtype=float)
    if ttm == 0:
        return np.maximum(spot - strike, 0.0)
    sig = vol * math.sqrt(ttm)
    disc = math.exp(-rate * ttm)
    if sig == 0.0:
        return np.maximum(spot - strike * disc, 0.0)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * ttm) / sig
    d2 = d1 - sig
    return spot * norm_cdf(d1) - strike * disc * norm_cdf(d2)


def call_delta(spot, strike, rate, vol, ttm):
    spot = np.asarray(spot, dtype=float)
    sig = vol * math.sqrt(ttm)
    if ttm == 0 or sig == 0.0:
        forward = spot * math.exp(rate * ttm)
        return np.where(forward > strike, 1.0,
                        np.where(forward < strike, 0.0, 0.5))
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * ttm) / sig
    return norm_cdf(d1)


@dataclass(frozen=True)
class Option:
    strike: float
    pricing_vol: float
    maturity_days: int
    rate: float = 0.0
    multiplier: int = 100


@dataclass(frozen=True)
class HedgingBatchEnv:
    """Vectorized episode mechanics over an (M, N+1) price matrix."""

    paths: np.ndarray
    option: Option
    pi: float

    def __post_init__(self):
        n = self.option.maturity_days
        if self.paths.shape[1] != n + 1:
            raise ValueError(
                f"paths have {self.paths.shape[1] - 1} steps, maturity is {n}")
        values = np.empty_like(self.paths)
        for t in range(n + 1):
            values[:, t] = self.option.multiplier * call_price(
                self.paths[:, t], self.option.strike, self.option.rate,
                self.option.pricing_vol, n - t)
        object.__setattr__(self, "values", values)

    def step_reward(self, t, holdings, actions, rows=None):
        """Reward of step t for the given holdings and actions.

        ``rows`` selects a subset of episodes (default all).  Returns the
        reward array and the next holdings (zero after terminal liquidation).
        """
        n = self.option.maturity_days
        s = self.paths if rows is None else self.paths[rows]
        v = self.values if rows is None else self.values[rows]
        s_now, s_next = s[:, t], s[:, t + 1]
        reward = -(v[:, t + 1] - v[:, t]) + holdings * (s_next - s_now) \
            - self.pi * np.abs(s_next * (actions - holdings))
        next_holdings = actions.copy()
        if t + 1 == n:
            reward = reward - self.pi * np.abs(s_next * actions)
            next_holdings = np.zeros_like(actions)
        return reward, next_holdings

    def rollout_costs(self, act_fn, rows=None):
        """Total episode cost (-sum of rewards) under a deterministic policy.

        ``act_fn(holdings, prices, ttm_days) -> actions`` is called once per
        step with vectors over the selected episodes.
        """
        n = self.option.maturity_days
        s = self.paths if rows is None else self.paths[rows]
        m = s.shape[0]
        holdings = np.zeros(m)
        total = np.zeros(m)
        for t in range(n):
            actions = np.clip(act_fn(holdings, s[:, t], n - t), 0.0,
                              float(self.option.multiplier))
            reward, holdings = self.step_reward(t, holdings, actions, rows)
            total += reward
        return -total

    def delta_costs(self, rows=None):
        """Episode costs of the delta rule (post-step-time delta)."""
        o = self.option

        def act(holdings, prices, ttm):
            return o.multiplier * call_delta(prices, o.strike, o.rate,
                                             o.pricing_vol, ttm - 1)

        return self.rollout_costs(act, rows)


def objective(costs, risk_c: float) -> float:
    """Mean cost plus risk_c times the cost standard deviation."""
    costs = np.asarray(costs, dtype=float)
    return float(costs.mean() + risk_c * costs.std(ddof=1))
