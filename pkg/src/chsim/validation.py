"""Similarity scoring between simulated and historical series.

The core metric symbolizes returns into a small alphabet using quantile bins
taken from the reference series, forms empirical distributions of symbol words
at several lengths, and scores each length with the subtracted L-divergence

    D_l = 2 * H((f_obs + f_sim) / 2) - H(f_sim) - H(f_obs)

(base-2 entropies), which is zero exactly when the word distributions agree.
The final score is a weighted mean over word lengths.  The module also carries
the Welch two-sample t-test used to compare sets of divergence values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError, ParameterError
from .simulator import ScenarioSet
from .special import student_t_sf2
from .stylized_facts import log_returns


@dataclass(frozen=True)
class GslDivConfig:
    """Discretization and word-length scheme for the divergence."""

    n_symbols: int = 5
    word_lengths: tuple = (1, 2, 3, 4, 5, 6)
    word_weights: tuple = None  # uniform when omitted

    def __post_init__(self):
        if self.n_symbols < 2:
            raise ParameterError(f"n_symbols must be >= 2, got {self.n_symbols}")
        if len(self.word_lengths) == 0 or any(l < 1 for l in self.word_lengths):
            raise ParameterError("word_lengths must be nonempty, each >= 1")
        if self.word_weights is None:
            w = np.full(len(self.word_lengths), 1.0 / len(self.word_lengths))
            object.__setattr__(self, "word_weights", tuple(w))
        else:
            w = np.asarray(self.word_weights, dtype=float)
            if len(w) != len(self.word_lengths):
                raise ParameterError("word_weights must match word_lengths")
            if np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-9):
                raise ParameterError("word_weights must be nonnegative and sum to 1")


def _symbolize(returns, edges):
    return np.searchsorted(edges, returns, side="left")


def _word_distribution(symbols, length, n_symbols):
    """Empirical distribution over overlapping words, keyed by radix encoding."""
    n = symbols.size - length + 1
    codes = np.zeros(n, dtype=np.int64)
    for j in range(length):
        codes = codes * n_symbols + symbols[j:j + n]
    keys, counts = np.unique(codes, return_counts=True)
    return keys, counts / n


def _entropy2(probs):
    p = probs[probs > 0]
    return float(-(p * np.log2(p)).sum())


def _merged(keys_a, p_a, keys_b, p_b):
    keys = np.union1d(keys_a, keys_b)
    a = np.zeros(keys.size)
    b = np.zeros(keys.size)
    a[np.searchsorted(keys, keys_a)] = p_a
    b[np.searchsorted(keys, keys_b)] = p_b
    return a, b


def gsl_div(observed, simulated, config: GslDivConfig = GslDivConfig()) -> float:
    """Divergence between a simulated price series and an observed reference.

    Bin edges are the return quantiles of the observed series and are applied
    to both series, so the roles are asymmetric by construction.
    """
    r_obs = log_returns(observed)
    r_sim = log_returns(simulated)
    max_len = max(config.word_lengths)
    if r_obs.size < max_len or r_sim.size < max_len:
        raise InsufficientDataError(
            f"both series need at least {max_len} returns for the longest word"
        )
    qs = np.arange(1, config.n_symbols) / config.n_symbols
    edges = np.quantile(r_obs, qs)
    s_obs = _symbolize(r_obs, edges)
    s_sim = _symbolize(r_sim, edges)
    for name, s in (("observed", s_obs), ("simulated", s_sim)):
        if np.unique(s).size < 2:
            raise DegenerateSeriesError(
                f"{name} series maps to a single symbol; discretization is degenerate"
            )
    total = 0.0
    for length, weight in zip(config.word_lengths, config.word_weights):
        k_obs, p_obs = _word_distribution(s_obs, length, config.n_symbols)
        k_sim, p_sim = _word_distribution(s_sim, length, config.n_symbols)
        a, b = _merged(k_obs, p_obs, k_sim, p_sim)
        d = 2.0 * _entropy2(0.5 * (a + b)) - _entropy2(b) - _entropy2(a)
        total += weight * d
    return total


def gsl_div_sample(scenarios: ScenarioSet, reference,
                   config: GslDivConfig = GslDivConfig()) -> np.ndarray:
    """One divergence value per scenario path against a fixed reference series."""
    return np.array([gsl_div(reference, row, config) for row in scenarios.paths])


@dataclass(frozen=True)
class WelchResult:
    t_statistic: float
    p_value: float
    df: float


def welch_t_test(xs, ys) -> WelchResult:
    """Unequal-variance two-sample t-test, two-sided.

    Degrees of freedom follow Welch-Satterthwaite; the p-value comes from the
    Student-t tail via the local incomplete-beta implementation.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2 or y.size < 2:
        raise InsufficientDataError("each sample needs at least 2 observations")
    vx = x.var(ddof=1)
    vy = y.var(ddof=1)
    if vx == 0.0 and vy == 0.0:
        raise DegenerateSeriesError("both samples have zero variance")
    sx = vx / x.size
    sy = vy / y.size
    se2 = sx + sy
    t = (x.mean() - y.mean()) / math.sqrt(se2)
    df = se2 * se2 / (sx * sx / (x.size - 1) + sy * sy / (y.size - 1))
    return WelchResult(t_statistic=float(t), p_value=student_t_sf2(t, df), df=float(df))
