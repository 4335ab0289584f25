"""Transaction-cost hedging environment for a short call position.

A trader is short one call on 100 shares and rebalances a long stock position
once per day.  The per-step reward is the accounting P&L of the combined book:

    R = -(V' - V) + H * (S' - S) - pi * |S' * (H' - H)|

where V is the option value per contract, H the share holding carried into
the step, S the underlying price, and pi the proportional transaction cost.
The action taken in a step sets the holding traded into at the next close
(priced at S').  At maturity the option settles at intrinsic value and the
stock position is liquidated, paying costs on the final trade.

Policies are either the Black-Scholes delta rule or a small feed-forward
network loaded from a portable weights file (inputs holding, price, days to
maturity; sigmoid output scaled to [0, 100] shares).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EpisodeFinishedError, InsufficientDataError, ParameterError, WeightsFormatError
from .simulator import ScenarioSet

logger = logging.getLogger(__name__)

CONTRACT_MULTIPLIER = 100

WEIGHTS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class OptionSpec:
    """European call being hedged; rates and vols are per trading day."""

    strike: float
    pricing_vol: float
    maturity_days: int = 30
    rate: float = 0.0
    contract_multiplier: int = CONTRACT_MULTIPLIER

    def __post_init__(self):
        if self.strike <= 0:
            raise ParameterError(f"strike must be > 0, got {self.strike}")
        if self.pricing_vol < 0:
            raise ParameterError(f"pricing_vol must be >= 0, got {self.pricing_vol}")
        if self.maturity_days < 1:
            raise ParameterError(f"maturity_days must be >= 1, got {self.maturity_days}")
        if self.contract_multiplier != CONTRACT_MULTIPLIER:
            raise ParameterError("one contract is 100 underlying shares")


@dataclass(frozen=True)
class HedgingEpisodeState:
    """(holding, price, days to maturity) plus the step counter."""

    holding: float
    price: float
    ttm_days: int
    step_index: int


@dataclass(frozen=True)
class CostLevel:
    """Proportional transaction cost as a fraction of traded value."""

    pi: float

    def __post_init__(self):
        if self.pi < 0:
            raise ParameterError(f"pi must be >= 0, got {self.pi}")


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _norm_cdf_vec(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    flat = x.ravel()
    res = out.ravel()
    for i in range(flat.size):
        res[i] = _norm_cdf(flat[i])
    return out


def bs_call_price(spot, strike, rate, vol, ttm):
    """Black-Scholes European call value (per share).

    Accepts a scalar or array spot.  At ttm = 0 the intrinsic payoff is
    returned; at vol = 0 the discounted forward intrinsic value.
    """
    spot_arr = np.asarray(spot, dtype=float)
    if np.any(spot_arr <= 0):
        raise ParameterError("spot must be > 0")
    if strike <= 0:
        raise ParameterError(f"strike must be > 0, got {strike}")
    if vol < 0:
        raise ParameterError(f"vol must be >= 0, got {vol}")
    if ttm < 0:
        raise ParameterError(f"ttm must be >= 0, got {ttm}")
    if ttm == 0:
        out = np.maximum(spot_arr - strike, 0.0)
        return float(out) if np.isscalar(spot) else out
    sig = vol * math.sqrt(ttm)
    disc = math.exp(-rate * ttm)
    if sig == 0.0:
        out = np.maximum(spot_arr - strike * disc, 0.0)
        return float(out) if np.isscalar(spot) else out
    d1 = (np.log(spot_arr / strike) + (rate + 0.5 * vol * vol) * ttm) / sig
    d2 = d1 - sig
    out = spot_arr * _norm_cdf_vec(d1) - strike * disc * _norm_cdf_vec(d2)
    return float(out) if np.isscalar(spot) else out


def bs_call_delta(spot, strike, rate, vol, ttm):
    """Call delta in [0, 1]; indicator conventions at the ttm = 0 / vol = 0 edges."""
    spot_arr = np.asarray(spot, dtype=float)
    if np.any(spot_arr <= 0):
        raise ParameterError("spot must be > 0")
    if strike <= 0:
        raise ParameterError(f"strike must be > 0, got {strike}")
    if vol < 0:
        raise ParameterError(f"vol must be >= 0, got {vol}")
    if ttm < 0:
        raise ParameterError(f"ttm must be >= 0, got {ttm}")
    sig = vol * math.sqrt(ttm)
    if ttm == 0 or sig == 0.0:
        forward = spot_arr * math.exp(rate * ttm)
        out = np.where(forward > strike, 1.0, np.where(forward < strike, 0.0, 0.5))
        return float(out) if np.isscalar(spot) else out
    d1 = (np.log(spot_arr / strike) + (rate + 0.5 * vol * vol) * ttm) / sig
    out = _norm_cdf_vec(d1)
    return float(out) if np.isscalar(spot) else out


def episode_start(path, option: OptionSpec) -> HedgingEpisodeState:
    """Reset state: zero holding at the first price of the scenario."""
    return HedgingEpisodeState(holding=0.0, price=float(path[0]),
                               ttm_days=option.maturity_days, step_index=0)


def env_step(state: HedgingEpisodeState, action: float, path,
             option: OptionSpec, cost: CostLevel):
    """Advance the episode one day; returns (next_state, reward).

    The action is the target holding in [0, 100], traded at the next close.
    On the step that reaches maturity the position is also liquidated to zero
    at the settlement price, with costs.
    """
    n = option.maturity_days
    if state.step_index >= n:
        raise EpisodeFinishedError(
            f"episode is finished (step {state.step_index} of {n})")
    a = float(action)
    if a < 0.0 or a > option.contract_multiplier:
        logger.warning("action %.4f outside [0, %d]; clamping", a,
                       option.contract_multiplier)
        a = min(max(a, 0.0), float(option.contract_multiplier))
    t = state.step_index
    s_now = float(path[t])
    s_next = float(path[t + 1])
    mult = option.contract_multiplier
    v_now = mult * bs_call_price(s_now, option.strike, option.rate,
                                 option.pricing_vol, state.ttm_days)
    v_next = mult * bs_call_price(s_next, option.strike, option.rate,
                                  option.pricing_vol, state.ttm_days - 1)
    reward = -(v_next - v_now) + state.holding * (s_next - s_now) \
        - cost.pi * abs(s_next * (a - state.holding))
    holding_next = a
    if t + 1 == n:
        reward -= cost.pi * abs(s_next * (0.0 - a))
        holding_next = 0.0
    next_state = HedgingEpisodeState(holding=holding_next, price=s_next,
                                     ttm_days=state.ttm_days - 1,
                                     step_index=t + 1)
    return next_state, reward


def delta_hedge_policy(state: HedgingEpisodeState, option: OptionSpec) -> float:
    """Hold contract_multiplier times the delta at the post-step time."""
    return option.contract_multiplier * bs_call_delta(
        state.price, option.strike, option.rate, option.pricing_vol,
        state.ttm_days - 1)


@dataclass
class BatchNormStats:
    """Inference-time batch-norm affine: scale*(x-mean)/sqrt(var+eps)+shift."""

    mean: np.ndarray
    var: np.ndarray
    scale: np.ndarray
    shift: np.ndarray
    epsilon: float = 1e-5


@dataclass
class PolicyLayer:
    weight: np.ndarray  # (out, in), row-major
    bias: np.ndarray    # (out,)
    activation: str = "none"  # relu | sigmoid | none
    batch_norm: BatchNormStats = None


@dataclass
class PolicyWeights:
    """Portable MLP for the hedging policy.

    Inputs, in order: (holding, price, ttm_days), normalized by the stored
    per-input affine.  The last layer must end in a sigmoid whose output is
    scaled to shares.
    """

    layers: list
    input_offset: np.ndarray
    input_scale: np.ndarray
    output_scale: float = 100.0
    schema_version: int = WEIGHTS_SCHEMA_VERSION

    def validate(self):
        if self.schema_version != WEIGHTS_SCHEMA_VERSION:
            raise WeightsFormatError(
                f"unsupported schema version {self.schema_version}")
        offset = np.asarray(self.input_offset, dtype=float)
        scale = np.asarray(self.input_scale, dtype=float)
        if offset.shape != (3,) or scale.shape != (3,):
            raise WeightsFormatError("input normalization must cover 3 inputs")
        if np.any(scale == 0):
            raise WeightsFormatError("input_scale entries must be nonzero")
        if not self.layers:
            raise WeightsFormatError("at least one layer is required")
        dim = 3
        for i, layer in enumerate(self.layers):
            w = np.asarray(layer.weight, dtype=float)
            b = np.asarray(layer.bias, dtype=float)
            if w.ndim != 2 or w.shape[1] != dim:
                raise WeightsFormatError(
                    f"layer {i} expects input dim {dim}, weight shape {w.shape}")
            if b.shape != (w.shape[0],):
                raise WeightsFormatError(f"layer {i} bias shape {b.shape} mismatch")
            if layer.activation not in ("relu", "sigmoid", "none"):
                raise WeightsFormatError(
                    f"layer {i} has unknown activation {layer.activation!r}")
            if layer.batch_norm is not None:
                bn = layer.batch_norm
                for name in ("mean", "var", "scale", "shift"):
                    arr = np.asarray(getattr(bn, name), dtype=float)
                    if arr.shape != (w.shape[0],):
                        raise WeightsFormatError(
                            f"layer {i} batch-norm {name} shape mismatch")
                if np.any(np.asarray(bn.var, dtype=float) < 0):
                    raise WeightsFormatError(f"layer {i} batch-norm variance < 0")
            dim = w.shape[0]
        if dim != 1:
            raise WeightsFormatError(f"network must end in 1 output, got {dim}")
        if self.layers[-1].activation != "sigmoid":
            raise WeightsFormatError("final activation must be sigmoid")
        if not np.isfinite(self.output_scale) or self.output_scale <= 0:
            raise WeightsFormatError("output_scale must be positive and finite")


def _forward_batch(weights: PolicyWeights, x: np.ndarray) -> np.ndarray:
    """(n, 3) state rows -> (n,) actions in [0, output_scale]."""
    offset = np.asarray(weights.input_offset, dtype=float)
    scale = np.asarray(weights.input_scale, dtype=float)
    h = (x - offset) / scale
    for layer in weights.layers:
        h = h @ np.asarray(layer.weight, dtype=float).T + np.asarray(layer.bias, dtype=float)
        if layer.batch_norm is not None:
            bn = layer.batch_norm
            h = (h - np.asarray(bn.mean, dtype=float)) \
                / np.sqrt(np.asarray(bn.var, dtype=float) + bn.epsilon)
            h = h * np.asarray(bn.scale, dtype=float) + np.asarray(bn.shift, dtype=float)
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
        elif layer.activation == "sigmoid":
            h = 1.0 / (1.0 + np.exp(-h))
    return weights.output_scale * h[:, 0]


def policy_forward(weights: PolicyWeights, state: HedgingEpisodeState) -> float:
    """Deterministic inference for one state; output in [0, 100] shares."""
    weights.validate()
    x = np.array([[state.holding, state.price, float(state.ttm_days)]])
    return float(_forward_batch(weights, x)[0])


class NeuralPolicy:
    """Callable (state, option) -> action wrapping a weights file."""

    def __init__(self, weights: PolicyWeights):
        weights.validate()
        self.weights = weights

    def __call__(self, state: HedgingEpisodeState, option: OptionSpec) -> float:
        x = np.array([[state.holding, state.price, float(state.ttm_days)]])
        return float(_forward_batch(self.weights, x)[0])


@dataclass
class CostLevelReport:
    cost: float
    mean_pnl: float
    pnl_std: float
    expected_shortfall: float       # currency, mean of the worst tail
    expected_shortfall_pct: float   # as % of the initial option premium
    premium: float
    pnls: np.ndarray = field(repr=False, default=None)


@dataclass
class EvaluationReport:
    policy_tag: str
    option: OptionSpec
    es_confidence: float
    levels: list


def _batch_actions(policy, option, holdings, prices, ttm):
    """Vectorized action computation for the two built-in policy kinds."""
    if policy == "delta":
        return option.contract_multiplier * bs_call_delta(
            prices, option.strike, option.rate, option.pricing_vol, ttm - 1)
    if isinstance(policy, (PolicyWeights, NeuralPolicy)):
        w = policy.weights if isinstance(policy, NeuralPolicy) else policy
        x = np.column_stack([holdings, prices, np.full(prices.shape, float(ttm))])
        return _forward_batch(w, x)
    # generic callable: per-episode loop
    return np.array([
        policy(HedgingEpisodeState(holding=float(h), price=float(p),
                                   ttm_days=int(ttm), step_index=option.maturity_days - ttm),
               option)
        for h, p in zip(holdings, prices)
    ])


def episode_pnls(policy, scenarios: ScenarioSet, option: OptionSpec,
                 cost: CostLevel) -> np.ndarray:
    """Total episode P&L per scenario, identical to stepping env_step."""
    s = scenarios.paths
    n = option.maturity_days
    if scenarios.n_steps != n:
        raise ParameterError(
            f"scenario length {scenarios.n_steps} != maturity {n} days")
    mult = option.contract_multiplier
    m = s.shape[0]
    values = np.empty_like(s)
    for t in range(n + 1):
        values[:, t] = mult * bs_call_price(s[:, t], option.strike, option.rate,
                                            option.pricing_vol, n - t)
    holdings = np.zeros(m)
    pnl = np.zeros(m)
    for t in range(n):
        ttm = n - t
        actions = np.clip(
            _batch_actions(policy, option, holdings, s[:, t], ttm),
            0.0, float(mult))
        pnl += -(values[:, t + 1] - values[:, t]) \
            + holdings * (s[:, t + 1] - s[:, t]) \
            - cost.pi * np.abs(s[:, t + 1] * (actions - holdings))
        if t + 1 == n:
            pnl -= cost.pi * np.abs(s[:, t + 1] * actions)
        holdings = actions
    return pnl


def evaluate_policy(policy, scenarios: ScenarioSet, option: OptionSpec,
                    cost_levels, es_confidence: float = 0.95) -> EvaluationReport:
    """Evaluate a policy over every scenario at each cost level.

    Per level: mean and std of episode P&L, and the expected shortfall (mean
    of the worst (1 - confidence) share of episodes) both in currency and as a
    percentage of the initial option premium.
    """
    if not 0 < es_confidence < 1:
        raise ParameterError("es_confidence must be in (0, 1)")
    s0 = scenarios.paths[:, 0]
    premium = float(np.mean(option.contract_multiplier * bs_call_price(
        s0, option.strike, option.rate, option.pricing_vol, option.maturity_days)))
    levels = []
    for pi in cost_levels:
        pnls = episode_pnls(policy, scenarios, option, CostLevel(pi=float(pi)))
        k = max(1, int(math.floor((1.0 - es_confidence) * pnls.size)))
        worst = np.sort(pnls)[:k]
        es = float(worst.mean())
        levels.append(CostLevelReport(
            cost=float(pi), mean_pnl=float(pnls.mean()),
            pnl_std=float(pnls.std(ddof=1)) if pnls.size > 1 else 0.0,
            expected_shortfall=es,
            expected_shortfall_pct=100.0 * es / premium if premium > 0 else math.nan,
            premium=premium, pnls=pnls))
    tag = policy if isinstance(policy, str) else type(policy).__name__
    return EvaluationReport(policy_tag=str(tag), option=option,
                            es_confidence=es_confidence, levels=levels)


def build_test_scenarios(prices, window: int = 30,
                         initial_price: float = 100.0) -> ScenarioSet:
    """Rolling-window return paths rebased to a common initial price.

    Each consecutive window of ``window`` returns becomes one scenario whose
    return sequence equals the source window exactly; a series of length n
    yields n - window scenarios.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.size < window + 1:
        raise InsufficientDataError(
            f"need at least {window + 1} prices, got {prices.size}")
    if initial_price <= 0:
        raise ParameterError("initial_price must be > 0")
    if not np.all(prices > 0):
        raise ParameterError("prices must be strictly positive")
    windows = np.lib.stride_tricks.sliding_window_view(prices, window + 1)
    ratios = windows[:, 1:] / windows[:, :-1]
    paths = np.empty((windows.shape[0], window + 1))
    paths[:, 0] = initial_price
    np.multiply.accumulate(ratios, axis=1, out=paths[:, 1:])
    paths[:, 1:] *= initial_price
    return ScenarioSet(paths=paths, seed=0, model_tag="historical-windows",
                       params_snapshot={"window": window,
                                        "initial_price": initial_price,
                                        "source_length": int(prices.size)})
