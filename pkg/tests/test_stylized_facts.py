import math

import numpy as np
import pytest

from chsim.errors import (
    DegenerateSeriesError,
    InsufficientDataError,
    ParameterError,
)
from chsim.simulator import ScenarioSet, simulate_gbm, simulate_heston
from chsim.stylized_facts import (
    HILL_CAP,
    DistanceWeights,
    StylizedFactsTarget,
    acf,
    distance_report,
    hill_estimator,
    log_returns,
    realized_volatility,
    reference_stats,
    simulated_stats,
    stylized_facts_distance,
)


class TestLogReturns:
    def test_flat(self):
        assert np.array_equal(log_returns([100.0, 100.0, 100.0]), [0.0, 0.0])

    def test_single_step(self):
        got = log_returns([100.0, 100.0 * math.exp(0.01)])
        assert got[0] == pytest.approx(0.01, abs=1e-15)

    def test_exponential(self):
        got = log_returns([1.0, math.e, math.e ** 2])
        assert np.allclose(got, [1.0, 1.0], atol=1e-15)

    def test_nonpositive_price(self):
        with pytest.raises(ParameterError):
            log_returns([1.0, -1.0])

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            log_returns([1.0])


class TestHillEstimator:
    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_pareto_oracle(self, alpha):
        # |x| ~ Pareto(alpha): Hill index recovers alpha within 10% at n=1e5.
        rng = np.random.default_rng(42)
        x = (1.0 - rng.uniform(size=100000)) ** (-1.0 / alpha)
        est = hill_estimator(x, 0.05)
        assert abs(est - alpha) / alpha < 0.10

    def test_degenerate_tail_capped(self):
        assert hill_estimator(np.ones(1000), 0.05) == HILL_CAP

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(5000)
        assert hill_estimator(3.7 * x, 0.05) == pytest.approx(
            hill_estimator(x, 0.05), rel=1e-12)

    def test_needs_ten_tail_points(self):
        with pytest.raises(InsufficientDataError):
            hill_estimator(np.random.default_rng(0).standard_normal(100), 0.05)

    def test_zero_tail_values(self):
        with pytest.raises(DegenerateSeriesError):
            hill_estimator(np.zeros(1000), 0.05)


class TestAcf:
    def test_white_noise_band(self):
        rng = np.random.default_rng(11)
        a = acf(rng.standard_normal(100000), 20)
        assert np.all(np.abs(a) < 3 / math.sqrt(100000) * 1.5)

    def test_alternating_series(self):
        x = np.array([(-1.0) ** t for t in range(2000)])
        assert acf(x, 1)[0] == pytest.approx(-1.0, abs=1e-3)

    def test_ar1_oracle(self):
        rng = np.random.default_rng(5)
        n, coef = 100000, 0.5
        eps = rng.standard_normal(n)
        x = np.empty(n)
        x[0] = eps[0]
        for t in range(1, n):
            x[t] = coef * x[t - 1] + eps[t]
        got = acf(x, 5)
        assert np.all(np.abs(got - coef ** np.arange(1, 6)) < 0.02)

    def test_bounded(self):
        rng = np.random.default_rng(8)
        a = acf(rng.standard_normal(500), 20)
        assert np.all(np.abs(a) <= 1.0)

    def test_zero_variance(self):
        with pytest.raises(DegenerateSeriesError):
            acf(np.ones(100), 5)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            acf(np.arange(10.0), 10)


class TestRealizedVolatility:
    def test_constant_returns(self):
        assert realized_volatility(np.full(50, 0.01)) == 0.0

    def test_two_point_distribution(self):
        c, n = 0.02, 1000
        r = np.tile([c, -c], n // 2)
        assert realized_volatility(r) == pytest.approx(
            c * math.sqrt(n / (n - 1)), rel=1e-12)

    def test_gbm_oracle(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 100000, 1, 3)
        got = realized_volatility(log_returns(sc.paths[0]))
        assert abs(got - 0.01) / 0.01 < 0.02

    def test_scaling(self):
        rng = np.random.default_rng(0)
        r = rng.standard_normal(500)
        assert realized_volatility(-2.5 * r) == pytest.approx(
            2.5 * realized_volatility(r), rel=1e-12)


class TestDistance:
    def test_self_distance_zero(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 3000, 1, 7)
        target = reference_stats(sc.paths[0], 0.05, 20)
        assert stylized_facts_distance(sc, target) == 0.0

    def test_weight_scaling(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 1500, 2, 9)
        ref = simulate_gbm(0.0, 0.012, 100.0, 3000, 1, 10)
        target = reference_stats(ref.paths[0], 0.05, 20)
        d1 = stylized_facts_distance(sc, target, DistanceWeights(1, 1, 1, 1))
        d3 = stylized_facts_distance(sc, target, DistanceWeights(3, 3, 3, 3))
        assert d3 == pytest.approx(3 * d1, rel=1e-12)
        assert d1 >= 0

    def test_component_report(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 1500, 2, 9)
        ref = simulate_gbm(0.0, 0.012, 100.0, 3000, 1, 10)
        target = reference_stats(ref.paths[0], 0.05, 20)
        rep = distance_report(sc, target)
        total = rep.d_hill + rep.d_vol + rep.d_acf_returns + rep.d_acf_sq_returns
        assert rep.total == pytest.approx(total, rel=1e-12)

    def test_max_lag_mismatch_rejected(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 1000, 1, 1)
        target = reference_stats(sc.paths[0], 0.05, 10)
        with pytest.raises(ParameterError):
            stylized_facts_distance(sc, target, max_lag=20)

    def test_weights_validation(self):
        with pytest.raises(ParameterError):
            DistanceWeights(0, 0, 0, 0)
        with pytest.raises(ParameterError):
            DistanceWeights(-1, 1, 1, 1)


class TestReferenceStats:
    def test_deterministic_series_degenerate(self):
        prices = 100.0 * np.exp(0.001 * np.arange(600))
        with pytest.raises(DegenerateSeriesError):
            reference_stats(prices)

    def test_needs_500_observations(self):
        with pytest.raises(InsufficientDataError):
            reference_stats(np.linspace(100, 120, 400))

    def test_gbm_squared_acf_in_white_band(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 20000, 1, 5)
        stats = reference_stats(sc.paths[0], 0.05, 20)
        band = 3 / math.sqrt(20000) * 1.5
        assert np.all(np.abs(stats.acf_sq_returns) < band)

    def test_heston_volatility_clustering_visible(self):
        sc = simulate_heston(0.0, 1.2e-4, 0.02, 1.2e-4, 0.005, -0.5,
                             100.0, 20000, 1, 6)
        stats = reference_stats(sc.paths[0], 0.05, 20)
        band = 1.96 / math.sqrt(20000)
        assert stats.acf_sq_returns[0] > band

    def test_target_validation(self):
        with pytest.raises(ParameterError):
            StylizedFactsTarget(hill=-1.0, vol=0.01, acf_returns=np.zeros(5),
                                acf_sq_returns=np.zeros(5), max_lag=5)
        with pytest.raises(ParameterError):
            StylizedFactsTarget(hill=3.0, vol=0.01, acf_returns=np.full(5, 1.5),
                                acf_sq_returns=np.zeros(5), max_lag=5)


class TestSimulatedStats:
    def test_single_path_matches_reference(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 3000, 1, 8)
        a = simulated_stats(sc, 0.05, 20)
        b = reference_stats(sc.paths[0], 0.05, 20)
        assert a.hill == b.hill and a.vol == b.vol
        assert np.array_equal(a.acf_returns, b.acf_returns)

    def test_burn_in_drops_prefix(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 3000, 1, 8)
        a = simulated_stats(sc, 0.05, 20, burn_in=250)
        trimmed = ScenarioSet(paths=sc.paths[:, 250:], seed=0, model_tag="t")
        b = simulated_stats(trimmed, 0.05, 20)
        assert a.hill == b.hill and a.vol == b.vol

    def test_averages_across_paths(self):
        sc = simulate_gbm(0.0, 0.01, 100.0, 2000, 3, 8)
        got = simulated_stats(sc, 0.05, 10)
        per_path = [reference_stats(row, 0.05, 10) for row in sc.paths]
        assert got.vol == pytest.approx(np.mean([s.vol for s in per_path]), rel=1e-14)
        assert got.hill == pytest.approx(np.mean([s.hill for s in per_path]), rel=1e-14)
