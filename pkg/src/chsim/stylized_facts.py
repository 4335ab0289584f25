"""Stylized-fact statistics and the calibration distance built from them.

Four statistics summarize a return series: the Hill tail index (lower means
fatter tails), the per-day volatility, and the autocorrelation functions of
returns and of squared returns.  The calibration loss is a weighted sum of the
discrepancies between a simulated set of paths and a reference target:

    D = w1 * |hill_sim - hill_ref| / hill_ref
      + w2 * |vol_sim  - vol_ref | / vol_ref
      + w3 * mean_lag |acf_sim(l)    - acf_ref(l)|
      + w4 * mean_lag |acf_sq_sim(l) - acf_sq_ref(l)|

Relative errors are used for the scale quantities and mean absolute error for
the curves, so all four terms are dimensionless and unit weights are a
sensible default.  Statistics are computed per path and averaged across paths
before differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError, ParameterError
from .simulator import ScenarioSet

# Cap on the reported tail index when the Hill denominator degenerates; keeps
# grid-search losses finite on pathological paths.
HILL_CAP = 1000.0


@dataclass(frozen=True)
class StylizedFactsTarget:
    """Reference statistics a simulation is calibrated against."""

    hill: float
    vol: float
    acf_returns: np.ndarray
    acf_sq_returns: np.ndarray
    max_lag: int
    tail_fraction: float = 0.05
    degenerate_tail: bool = False

    def __post_init__(self):
        object.__setattr__(self, "acf_returns", np.asarray(self.acf_returns, dtype=float))
        object.__setattr__(self, "acf_sq_returns", np.asarray(self.acf_sq_returns, dtype=float))
        if self.hill <= 0:
            raise ParameterError(f"hill index must be > 0, got {self.hill}")
        if self.vol < 0:
            raise ParameterError(f"vol must be >= 0, got {self.vol}")
        for name in ("acf_returns", "acf_sq_returns"):
            arr = getattr(self, name)
            if len(arr) != self.max_lag:
                raise ParameterError(f"{name} must have max_lag={self.max_lag} entries")
            if np.any(np.abs(arr) > 1.0 + 1e-12):
                raise ParameterError(f"{name} outside [-1, 1]")


@dataclass(frozen=True)
class DistanceWeights:
    """Nonnegative weights for the four distance terms."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0

    def __post_init__(self):
        ws = (self.w1, self.w2, self.w3, self.w4)
        if any(w < 0 for w in ws):
            raise ParameterError("weights must be >= 0")
        if all(w == 0 for w in ws):
            raise ParameterError("at least one weight must be positive")


@dataclass(frozen=True)
class DistanceReport:
    """Per-term decomposition of the stylized-facts distance."""

    d_hill: float
    d_vol: float
    d_acf_returns: float
    d_acf_sq_returns: float
    total: float
    sim: StylizedFactsTarget = field(repr=False, default=None)


def log_returns(prices) -> np.ndarray:
    """r_t = ln(P_{t+1} / P_t); output is one shorter than the input."""
    prices = np.asarray(prices, dtype=float)
    if prices.size < 2:
        raise InsufficientDataError("need at least 2 prices")
    if not np.all(prices > 0):
        raise ParameterError("prices must be strictly positive")
    return np.diff(np.log(prices))


def hill_estimator(returns, tail_fraction: float = 0.05) -> float:
    """Tail index of |returns| from the k = floor(tail_fraction * n) largest.

    The Hill statistic xi = mean(ln(x_(i) / x_(k+1))) over the k largest order
    statistics estimates 1/alpha; the returned index is 1/xi, capped at
    HILL_CAP when the tail degenerates.  Scale-invariant by construction.
    """
    if not 0 < tail_fraction < 1:
        raise ParameterError(f"tail_fraction must be in (0, 1), got {tail_fraction}")
    x = np.abs(np.asarray(returns, dtype=float))
    n = x.size
    k = int(math.floor(tail_fraction * n))
    if k < 10:
        raise InsufficientDataError(
            f"need at least 10 tail observations, got k={k} from n={n}"
        )
    if n < k + 1:
        raise InsufficientDataError("need at least k+1 observations")
    top = np.partition(x, n - k - 1)[n - k - 1:]
    top.sort()
    threshold = top[0]  # x_(k+1), the (k+1)-th largest
    if threshold <= 0:
        raise DegenerateSeriesError("tail contains zero values")
    xi = float(np.mean(np.log(top[1:] / threshold)))
    if xi <= 1.0 / HILL_CAP:
        return HILL_CAP
    return 1.0 / xi


def acf(series, max_lag: int) -> np.ndarray:
    """Autocorrelation at lags 1..max_lag with the full-sample mean and variance."""
    x = np.asarray(series, dtype=float)
    if max_lag < 1:
        raise ParameterError(f"max_lag must be >= 1, got {max_lag}")
    if x.size <= max_lag + 1:
        raise InsufficientDataError(
            f"series of length {x.size} too short for max_lag={max_lag}"
        )
    d = x - x.mean()
    denom = float(d @ d)
    if denom == 0.0:
        raise DegenerateSeriesError("series has zero variance")
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        out[lag - 1] = float(d[:-lag] @ d[lag:]) / denom
    return out


def realized_volatility(returns) -> float:
    """Sample standard deviation of the returns (n-1 denominator)."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise InsufficientDataError("need at least 2 returns")
    return float(np.std(r, ddof=1))


def series_stats(returns, tail_fraction: float, max_lag: int) -> StylizedFactsTarget:
    """All four statistics for a single return series."""
    vol = realized_volatility(returns)
    if vol < 1e-12:
        # Indistinguishable from a deterministic series at float precision.
        raise DegenerateSeriesError(
            "returns have (numerically) zero variance; statistics undefined")
    hill = hill_estimator(returns, tail_fraction)
    r = np.asarray(returns, dtype=float)
    return StylizedFactsTarget(
        hill=hill,
        vol=vol,
        acf_returns=acf(r, max_lag),
        acf_sq_returns=acf(r * r, max_lag),
        max_lag=max_lag,
        tail_fraction=tail_fraction,
        degenerate_tail=hill >= HILL_CAP,
    )


def reference_stats(prices, tail_fraction: float = 0.05, max_lag: int = 20) -> StylizedFactsTarget:
    """Target statistics from a historical price series (>= 500 observations)."""
    prices = np.asarray(prices, dtype=float)
    if prices.size < 500:
        raise InsufficientDataError(
            f"need at least 500 price observations, got {prices.size}"
        )
    return series_stats(log_returns(prices), tail_fraction, max_lag)


def simulated_stats(scenarios: ScenarioSet, tail_fraction: float = 0.05,
                    max_lag: int = 20, burn_in: int = 0) -> StylizedFactsTarget:
    """Per-path statistics averaged across all paths of a scenario set."""
    paths = scenarios.paths
    if burn_in < 0 or burn_in >= scenarios.n_steps:
        raise ParameterError(f"burn_in must be in [0, n_steps), got {burn_in}")
    hills = []
    vols = []
    acf1 = []
    acf2 = []
    degenerate = False
    for row in paths:
        r = log_returns(row[burn_in:])
        s = series_stats(r, tail_fraction, max_lag)
        hills.append(s.hill)
        vols.append(s.vol)
        acf1.append(s.acf_returns)
        acf2.append(s.acf_sq_returns)
        degenerate = degenerate or s.degenerate_tail
    return StylizedFactsTarget(
        hill=float(np.mean(hills)),
        vol=float(np.mean(vols)),
        acf_returns=np.mean(acf1, axis=0),
        acf_sq_returns=np.mean(acf2, axis=0),
        max_lag=max_lag,
        tail_fraction=tail_fraction,
        degenerate_tail=degenerate,
    )


def distance_report(scenarios: ScenarioSet, target: StylizedFactsTarget,
                    weights: DistanceWeights = DistanceWeights(),
                    tail_fraction: float = None, max_lag: int = None,
                    burn_in: int = 0) -> DistanceReport:
    """Distance between a scenario set and a target, with the per-term split."""
    if tail_fraction is None:
        tail_fraction = target.tail_fraction
    if max_lag is None:
        max_lag = target.max_lag
    if max_lag != target.max_lag:
        raise ParameterError(
            f"max_lag {max_lag} does not match target max_lag {target.max_lag}"
        )
    if target.hill <= 0 or target.vol <= 0:
        raise DegenerateSeriesError("target hill and vol must be positive")
    sim = simulated_stats(scenarios, tail_fraction, max_lag, burn_in)
    d_hill = abs(sim.hill - target.hill) / target.hill
    d_vol = abs(sim.vol - target.vol) / target.vol
    d1 = float(np.mean(np.abs(sim.acf_returns - target.acf_returns)))
    d2 = float(np.mean(np.abs(sim.acf_sq_returns - target.acf_sq_returns)))
    total = weights.w1 * d_hill + weights.w2 * d_vol + weights.w3 * d1 + weights.w4 * d2
    return DistanceReport(d_hill=d_hill, d_vol=d_vol, d_acf_returns=d1,
                          d_acf_sq_returns=d2, total=total, sim=sim)


def stylized_facts_distance(scenarios: ScenarioSet, target: StylizedFactsTarget,
                            weights: DistanceWeights = DistanceWeights(),
                            tail_fraction: float = None, max_lag: int = None,
                            burn_in: int = 0) -> float:
    """The scalar calibration loss; see the module docstring for the formula."""
    return distance_report(scenarios, target, weights, tail_fraction, max_lag,
                           burn_in).total
