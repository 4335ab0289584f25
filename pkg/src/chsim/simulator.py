"""Discrete-time market path generators.

Four related models share one noise contract: at each (path, step) a Philox
block yields three standard normals (z1, z2, z3).  The price shock is z1, the
variance shock is the rho-correlated mix of z1 and z2, and the fundamental
shock is z3.  Because the block is addressed by (seed, path, step), a model
that ignores some of the draws still sees exactly the same values for the ones
it uses, which makes the reductions between models hold sample by sample:

* full model with phi = 0, sigma = 0  ==  extended Chiarella with
  sigma_N = omega * sqrt(var0), bit for bit;
* full model with kappa = 0, alpha = 0, omega = 1  ==  Heston with
  mu = beta * tanh(gamma * m0), in log-price increments.

One time step is one trading day; all rates and volatilities are per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParameterError, SimulationError
from .philox import path_step_normals

MODEL_GBM = "gbm"
MODEL_HESTON = "heston"
MODEL_EXTENDED_CHIARELLA = "extended-chiarella"
MODEL_CHIARELLA_HESTON = "chiarella-heston"

ALL_MODELS = (
    MODEL_GBM,
    MODEL_HESTON,
    MODEL_EXTENDED_CHIARELLA,
    MODEL_CHIARELLA_HESTON,
)


@dataclass(frozen=True)
class ModelParams:
    """The eleven parameters of the full model.

    kappa    demand coefficient of fundamental traders (per log-price gap/day)
    beta     momentum demand scale (log-price per day)
    gamma    momentum saturation, > 0
    omega    volatility-trader demand scale
    g        fundamental log drift per day
    sigma_F  fundamental volatility per day
    alpha    momentum decay rate in [0, 1] (0 freezes the momentum signal)
    phi      variance mean-reversion rate per day, >= 0
    theta    long-run variance level, >= 0
    sigma    vol-of-vol, >= 0
    rho      shock correlation in [-1, 1]
    """

    kappa: float
    beta: float
    gamma: float
    omega: float
    g: float
    sigma_F: float
    alpha: float
    phi: float
    theta: float
    sigma: float
    rho: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if not 0 <= self.alpha <= 1:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not -1 <= self.rho <= 1:
            raise ParameterError(f"rho must be in [-1, 1], got {self.rho}")
        for name in ("theta", "phi", "sigma", "sigma_F"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class InitialState:
    """Starting point of a run: log price, log fundamental, momentum, variance."""

    p0: float
    f0: float
    m0: float
    var0: float

    def __post_init__(self):
        if self.var0 < 0:
            raise ParameterError(f"var0 must be >= 0, got {self.var0}")


def default_initial_state(theta: float) -> InitialState:
    """Fixed point of the deterministic skeleton: p = f = ln 100, m = 0, var = theta."""
    return InitialState(p0=math.log(100.0), f0=math.log(100.0), m0=0.0, var0=theta)


@dataclass
class ScenarioSet:
    """An M x (N+1) matrix of price levels plus generation metadata."""

    paths: np.ndarray
    seed: int
    model_tag: str
    params_snapshot: dict = field(default_factory=dict)

    def __post_init__(self):
        self.paths = np.ascontiguousarray(self.paths, dtype=np.float64)
        if self.paths.ndim != 2:
            raise ParameterError("paths must be a 2-D matrix of prices")
        if not np.isfinite(self.paths).all() or not (self.paths > 0).all():
            raise ParameterError("all prices must be strictly positive and finite")

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def n_steps(self) -> int:
        return self.paths.shape[1] - 1


def correlated_normal_pair(rho, rng, size=None):
    """Draw (eps_S, eps_V), marginally N(0,1) with correlation rho.

    eps_V = rho * eps_S + sqrt(1 - rho^2) * z for independent draws eps_S, z
    taken in that order from ``rng``.
    """
    if not -1 <= rho <= 1:
        raise ParameterError(f"rho must be in [-1, 1], got {rho}")
    eps_s = rng.standard_normal(size)
    z = rng.standard_normal(size)
    eps_v = rho * eps_s + math.sqrt(1.0 - rho * rho) * z
    return eps_s, eps_v


def _check_dims(n_steps, n_paths):
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps}")
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")


def _raise_if_not_finite(step, *arrays):
    for arr in arrays:
        if not np.isfinite(arr).all():
            raise SimulationError(
                f"non-finite state at step {step + 1}", step_index=step + 1
            )


def _to_prices(log_paths, seed, model_tag, snapshot, scale=1.0):
    """Exponentiate (n_steps+1, n_paths) log levels into an (M, N+1) price matrix.

    ``scale`` multiplies the exponentiated paths; price-level generators pass
    their starting price with log paths relative to it, so path[0] == p0
    exactly.
    """
    with np.errstate(over="ignore"):
        prices = scale * np.exp(log_paths.T)
    if not np.isfinite(prices).all():
        bad = int(np.argwhere(~np.isfinite(prices))[0, 1])
        raise SimulationError(f"price overflow at step {bad}", step_index=bad)
    return ScenarioSet(paths=prices, seed=seed, model_tag=model_tag,
                       params_snapshot=snapshot)


def simulate_chiarella_heston(params: ModelParams, init: InitialState,
                              n_steps: int, n_paths: int, seed: int) -> ScenarioSet:
    """Simulate the full three-trader model.

    Per step: dp = kappa*(f-p) + beta*tanh(gamma*m) + omega*sqrt(var)*eps_S,
    then the momentum EWMA, the drifting fundamental, and the square-root
    variance process.  Negative variance excursions are fully truncated:
    max(var, 0) feeds both square roots and is what gets stored.
    """
    _check_dims(n_steps, n_paths)
    z1, z2, z3 = path_step_normals(seed, n_paths, n_steps)
    srho = math.sqrt(1.0 - params.rho * params.rho)

    p = np.full(n_paths, float(init.p0))
    f = np.full(n_paths, float(init.f0))
    m = np.full(n_paths, float(init.m0))
    var = np.full(n_paths, float(init.var0))
    log_paths = np.empty((n_steps + 1, n_paths))
    log_paths[0] = p

    for t in range(n_steps):
        eps_s = z1[t]
        eps_v = params.rho * z1[t] + srho * z2[t]
        sq = np.sqrt(np.maximum(var, 0.0))
        dp = params.kappa * (f - p) + params.beta * np.tanh(params.gamma * m) \
            + params.omega * sq * eps_s
        p = p + dp
        m = (1.0 - params.alpha) * m + params.alpha * dp
        f = f + params.g + params.sigma_F * z3[t]
        var = np.maximum(var + params.phi * (params.theta - var) + params.sigma * sq * eps_v, 0.0)
        _raise_if_not_finite(t, p, var, f)
        log_paths[t + 1] = p

    snapshot = asdict(params) | asdict(init)
    return _to_prices(log_paths, seed, MODEL_CHIARELLA_HESTON, snapshot)


def simulate_extended_chiarella(kappa: float, beta: float, gamma: float,
                                sigma_N: float, g: float, sigma_F: float,
                                alpha: float, init: InitialState,
                                n_steps: int, n_paths: int, seed: int) -> ScenarioSet:
    """Fundamental + momentum traders with constant-scale noise sigma_N."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")
    if sigma_N < 0 or sigma_F < 0:
        raise ParameterError("noise scales must be >= 0")
    _check_dims(n_steps, n_paths)
    z1, _, z3 = path_step_normals(seed, n_paths, n_steps)

    p = np.full(n_paths, float(init.p0))
    f = np.full(n_paths, float(init.f0))
    m = np.full(n_paths, float(init.m0))
    log_paths = np.empty((n_steps + 1, n_paths))
    log_paths[0] = p

    for t in range(n_steps):
        eps_s = z1[t]
        dp = kappa * (f - p) + beta * np.tanh(gamma * m) + sigma_N * eps_s
        p = p + dp
        m = (1.0 - alpha) * m + alpha * dp
        f = f + g + sigma_F * z3[t]
        _raise_if_not_finite(t, p, f)
        log_paths[t + 1] = p

    snapshot = {"kappa": kappa, "beta": beta, "gamma": gamma, "sigma_N": sigma_N,
                "g": g, "sigma_F": sigma_F, "alpha": alpha} | asdict(init)
    return _to_prices(log_paths, seed, MODEL_EXTENDED_CHIARELLA, snapshot)


def simulate_heston(mu: float, var0: float, phi: float, theta: float,
                    sigma: float, rho: float, p0: float,
                    n_steps: int, n_paths: int, seed: int) -> ScenarioSet:
    """Stochastic-volatility log walk: dp = mu + sqrt(var)*eps_S per day.

    The variance follows the same Euler step and full-truncation rule as the
    full model, so the kappa = 0, alpha = 0, omega = 1 reduction is exact.
    """
    if p0 <= 0:
        raise ParameterError(f"p0 must be > 0, got {p0}")
    if var0 < 0:
        raise ParameterError(f"var0 must be >= 0, got {var0}")
    if not -1 <= rho <= 1:
        raise ParameterError(f"rho must be in [-1, 1], got {rho}")
    if phi < 0 or theta < 0 or sigma < 0:
        raise ParameterError("phi, theta, sigma must be >= 0")
    _check_dims(n_steps, n_paths)
    z1, z2, _ = path_step_normals(seed, n_paths, n_steps)
    srho = math.sqrt(1.0 - rho * rho)

    p = np.zeros(n_paths)  # log price relative to p0
    var = np.full(n_paths, float(var0))
    log_paths = np.empty((n_steps + 1, n_paths))
    log_paths[0] = p

    for t in range(n_steps):
        eps_s = z1[t]
        eps_v = rho * z1[t] + srho * z2[t]
        sq = np.sqrt(np.maximum(var, 0.0))
        dp = mu + sq * eps_s
        p = p + dp
        var = np.maximum(var + phi * (theta - var) + sigma * sq * eps_v, 0.0)
        _raise_if_not_finite(t, p, var)
        log_paths[t + 1] = p

    snapshot = {"mu": mu, "var0": var0, "phi": phi, "theta": theta,
                "sigma": sigma, "rho": rho, "p0": p0}
    return _to_prices(log_paths, seed, MODEL_HESTON, snapshot, scale=p0)


def simulate_gbm(mu: float, sigma: float, p0: float,
                 n_steps: int, n_paths: int, seed: int) -> ScenarioSet:
    """Constant-volatility log walk with increment (mu - sigma^2/2) + sigma*eps."""
    if p0 <= 0:
        raise ParameterError(f"p0 must be > 0, got {p0}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    _check_dims(n_steps, n_paths)
    z1, _, _ = path_step_normals(seed, n_paths, n_steps)

    drift = mu - 0.5 * sigma * sigma
    increments = drift + sigma * z1
    log_paths = np.empty((n_steps + 1, n_paths))
    log_paths[0] = 0.0  # log price relative to p0
    np.cumsum(increments, axis=0, out=log_paths[1:])

    snapshot = {"mu": mu, "sigma": sigma, "p0": p0}
    return _to_prices(log_paths, seed, MODEL_GBM, snapshot, scale=p0)
