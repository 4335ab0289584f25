"""Twin-critic deterministic policy gradient for the hedging environment.

One critic tracks the expected remaining episode cost, the other the expected
squared cost, so the actor can descend the risk-adjusted objective

    J(s) = Q1(s, a) + c * sqrt(max(Q2(s, a) - Q1(s, a)^2, 0)),  a = actor(s).

Critic targets follow the squared-return decomposition: with step cost c_t
and successor action a' from the target actor,

    y1 = c_t + (1 - done) * Q1'(s', a')
    y2 = c_t^2 + (1 - done) * (2 c_t Q1'(s', a') + Q2'(s', a'))

(terminal targets are the cost and squared cost).  Costs are scaled by the
option premium inside the learner; the objective is reported in currency.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import HedgingBatchEnv, Option, objective
from .export import actor_to_weights_doc, forward_doc, save_weights
from .networks import Actor, Critic
from .replay import ReplayBuffer
from .scenario import ScenarioFile, read_scenarios


@dataclass
class TrainerConfig:
    pi: float = 0.01                 # proportional transaction cost
    risk_c: float = 1.5              # weight of the cost std in the objective
    epochs: int = 500
    episodes_per_epoch: int = 8
    updates_per_epoch: int = 32
    batch_size: int = 256
    buffer_capacity: int = 1_000_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.005               # target-network smoothing
    policy_delay: int = 2            # critic updates per actor update
    noise_start: float = 10.0        # exploration noise, in shares
    noise_final: float = 1.0
    holdout_fraction: float = 0.1
    seed: int = 0
    strike: float = None             # default: at-the-money at episode start
    pricing_vol: float = None        # default: mean per-path realized vol
    rate: float = 0.0

    def __post_init__(self):
        if self.risk_c < 0:
            raise ValueError("risk_c must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.pi < 0:
            raise ValueError("pi must be >= 0")


@dataclass
class TrainResult:
    weights_doc: dict
    log_rows: list
    option: Option
    best_epoch: int
    best_objective: float            # trained policy, held-out slice, currency
    delta_objective: float           # delta-hedging baseline on the same slice
    holdout_rows: np.ndarray = field(repr=False, default=None)
    aborted: str = None


def _default_option(scen: ScenarioFile, cfg: TrainerConfig) -> Option:
    strike = cfg.strike
    if strike is None:
        strike = float(np.mean(scen.paths[:, 0]))
    vol = cfg.pricing_vol
    if vol is None:
        r = np.diff(np.log(scen.paths), axis=1)
        vol = float(np.mean(r.std(ddof=1, axis=1)))
    return Option(strike=strike, pricing_vol=vol,
                  maturity_days=scen.n_steps, rate=cfg.rate)


def _normalize(states, option: Option):
    out = np.empty_like(states)
    out[:, 0] = states[:, 0] / 100.0
    out[:, 1] = states[:, 1] / option.strike
    out[:, 2] = states[:, 2] / option.maturity_days
    return out


class _Learner:
    def __init__(self, cfg: TrainerConfig, option: Option, cost_scale: float):
        self.cfg = cfg
        self.option = option
        self.cost_scale = cost_scale
        self.actor = Actor()
        self.q1 = Critic()
        self.q2 = Critic()
        self.actor_target = copy.deepcopy(self.actor)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        for net in (self.actor_target, self.q1_target, self.q2_target):
            net.eval()
            for p in net.parameters():
                p.requires_grad_(False)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=cfg.actor_lr)
        self.q1_opt = torch.optim.Adam(self.q1.parameters(), lr=cfg.critic_lr)
        self.q2_opt = torch.optim.Adam(self.q2.parameters(), lr=cfg.critic_lr)
        self._updates = 0

    def act(self, states_raw) -> np.ndarray:
        self.actor.eval()
        with torch.no_grad():
            x = torch.from_numpy(_normalize(states_raw, self.option))
            return self.actor(x).numpy()

    def _soft_update(self, online, target):
        tau = self.cfg.tau
        with torch.no_grad():
            for p, tp in zip(online.parameters(), target.parameters()):
                tp.mul_(1.0 - tau).add_(tau * p)
            for b, tb in zip(online.buffers(), target.buffers()):
                tb.copy_(b)

    def update(self, batch):
        states, actions, costs, next_states, dones = batch
        s = torch.from_numpy(_normalize(states, self.option))
        a = torch.from_numpy(actions)
        c = torch.from_numpy(costs)
        s_next = torch.from_numpy(_normalize(next_states, self.option))
        live = torch.from_numpy(1.0 - dones)

        with torch.no_grad():
            a_next = self.actor_target(s_next)
            q1_next = self.q1_target(s_next, a_next)
            q2_next = self.q2_target(s_next, a_next)
            y1 = c + live * q1_next
            y2 = c * c + live * (2.0 * c * q1_next + q2_next)

        self.q1.train()
        loss1 = torch.mean((self.q1(s, a) - y1) ** 2)
        self.q1_opt.zero_grad()
        loss1.backward()
        self.q1_opt.step()

        self.q2.train()
        loss2 = torch.mean((self.q2(s, a) - y2) ** 2)
        self.q2_opt.zero_grad()
        loss2.backward()
        self.q2_opt.step()

        # Actor ascends the risk-adjusted objective through frozen critics,
        # on a delayed cadence for stability.
        self._updates += 1
        actor_loss = loss1.detach() * 0.0
        if self._updates % self.cfg.policy_delay == 0:
            self.q1.eval()
            self.q2.eval()
            self.actor.train()
            pi_a = self.actor(s)
            q1_pi = self.q1(s, pi_a)
            q2_pi = self.q2(s, pi_a)
            variance = torch.clamp(q2_pi - q1_pi * q1_pi, min=0.0)
            actor_loss = torch.mean(
                q1_pi + self.cfg.risk_c * torch.sqrt(variance + 1e-12))
            self.actor_opt.zero_grad()
            actor_loss.backward()
            self.actor_opt.step()
            self._soft_update(self.actor, self.actor_target)

        self._soft_update(self.q1, self.q1_target)
        self._soft_update(self.q2, self.q2_target)
        return (float(loss1.detach()), float(loss2.detach()),
                float(actor_loss.detach()))


def _collect(learner: _Learner, env: HedgingBatchEnv, rows, noise_sigma,
             rng, buffer: ReplayBuffer):
    """Roll the exploration policy over the selected episodes into the buffer."""
    n = env.option.maturity_days
    m = len(rows)
    s = env.paths[rows]
    holdings = np.zeros(m)
    for t in range(n):
        states = np.column_stack([holdings, s[:, t], np.full(m, float(n - t))])
        actions = learner.act(states)
        actions = np.clip(actions + rng.normal(0.0, noise_sigma, m), 0.0, 100.0)
        reward, next_holdings = env.step_reward(t, holdings, actions, rows)
        done = 1.0 if t + 1 == n else 0.0
        next_states = np.column_stack(
            [next_holdings, s[:, t + 1], np.full(m, float(n - t - 1))])
        buffer.push_batch(states, actions, -reward / learner.cost_scale,
                          next_states, np.full(m, done))
        holdings = next_holdings


def _policy_costs(learner: _Learner, env: HedgingBatchEnv, rows) -> np.ndarray:
    return env.rollout_costs(
        lambda h, p, ttm: learner.act(
            np.column_stack([h, p, np.full(len(h), float(ttm))])),
        rows)


def train(scenarios, cfg: TrainerConfig = TrainerConfig(),
          weights_path=None, log_path=None) -> TrainResult:
    """Train the hedging policy on a scenario file (path or ScenarioFile)."""
    torch.set_default_dtype(torch.float64)
    torch.manual_seed(cfg.seed)
    try:
        torch.use_deterministic_algorithms(True)
        strict_determinism = True
    except RuntimeError:
        strict_determinism = False
    scen = read_scenarios(scenarios) if not isinstance(scenarios, ScenarioFile) \
        else scenarios
    option = _default_option(scen, cfg)
    env = HedgingBatchEnv(paths=scen.paths, option=option, pi=cfg.pi)

    m = scen.n_paths
    n_holdout = max(2, int(round(cfg.holdout_fraction * m)))
    if n_holdout >= m:
        raise ValueError("not enough scenarios to hold out an eval slice")
    train_rows = np.arange(0, m - n_holdout)
    holdout_rows = np.arange(m - n_holdout, m)

    premium = float(np.mean(env.values[:, 0]))
    cost_scale = max(premium, 1e-9)
    rng = np.random.default_rng(cfg.seed)
    learner = _Learner(cfg, option, cost_scale)
    buffer = ReplayBuffer(cfg.buffer_capacity, rng)

    delta_costs = env.delta_costs(holdout_rows)
    delta_obj = objective(delta_costs, cfg.risk_c)

    log_rows = []
    best = None
    best_epoch = -1
    best_state = None
    aborted = None
    decay = (cfg.noise_final / cfg.noise_start) ** (1.0 / max(cfg.epochs - 1, 1)) \
        if cfg.noise_start > 0 else 1.0

    for epoch in range(cfg.epochs):
        sigma = cfg.noise_start * (decay ** epoch)
        rows = rng.choice(train_rows, size=min(cfg.episodes_per_epoch,
                                               len(train_rows)), replace=False)
        _collect(learner, env, rows, sigma, rng, buffer)
        if len(buffer) >= cfg.batch_size:
            for _ in range(cfg.updates_per_epoch):
                losses = learner.update(buffer.sample(cfg.batch_size))
                if any(not math.isfinite(v) for v in losses):
                    aborted = f"non-finite loss at epoch {epoch}"
                    break
        costs = _policy_costs(learner, env, holdout_rows)
        obj = objective(costs, cfg.risk_c)
        pnls = -costs
        k = max(1, int(math.floor(0.05 * pnls.size)))
        es = float(np.sort(pnls)[:k].mean())
        log_rows.append({
            "epoch": epoch, "objective": obj,
            "mean_pnl": float(pnls.mean()),
            "expected_shortfall_pct": 100.0 * es / premium,
            "noise_sigma": sigma,
            "strict_determinism": strict_determinism,
        })
        if aborted or math.isnan(obj):
            aborted = aborted or f"NaN objective at epoch {epoch}"
            break
        if best is None or obj < best:
            best = obj
            best_epoch = epoch
            best_state = {
                "actor": copy.deepcopy(learner.actor.state_dict()),
            }

    if best_state is not None:
        learner.actor.load_state_dict(best_state["actor"])
    learner.actor.eval()
    doc = actor_to_weights_doc(
        learner.actor,
        state_scale=(100.0, option.strike, float(option.maturity_days)))

    if weights_path is not None:
        save_weights(doc, weights_path)
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(log_rows[0].keys()))
            writer.writeheader()
            writer.writerows(log_rows)

    return TrainResult(weights_doc=doc, log_rows=log_rows, option=option,
                       best_epoch=best_epoch,
                       best_objective=float(best) if best is not None else math.nan,
                       delta_objective=delta_obj,
                       holdout_rows=holdout_rows, aborted=aborted)
