import math

import numpy as np
import pytest

from chsim.calibration import (
    ALPHA_FIXED,
    GAMMA_FIXED,
    FixedParams,
    GridSpec,
    calibrate_extended_chiarella,
    calibrate_gbm,
    calibrate_heston,
    fixed_params_from_history,
    grid_search,
    grid_search_calibrate,
    _FullModelSimulator,
)
from chsim.errors import InsufficientDataError, ParameterError
from chsim.simulator import (
    InitialState,
    ModelParams,
    default_initial_state,
    simulate_chiarella_heston,
    simulate_gbm,
    simulate_heston,
)
from chsim.stylized_facts import DistanceWeights, reference_stats, simulated_stats

THETA = 1.2e-4
TRUE_POINT = dict(kappa=0.08, beta=0.01, omega=1.0, theta=THETA, phi=0.03)
FIXED = FixedParams(g=2e-4, sigma_F=0.005, sigma=0.004, rho=-0.5,
                    mu=2e-4 + 0.5 * 0.005 ** 2)


def true_model_scenarios(n_steps=3000, n_paths=32, seed=555):
    params = ModelParams(gamma=GAMMA_FIXED, g=FIXED.g, sigma_F=FIXED.sigma_F,
                         alpha=ALPHA_FIXED, sigma=FIXED.sigma, rho=FIXED.rho,
                         **TRUE_POINT)
    return simulate_chiarella_heston(params, default_initial_state(THETA),
                                     n_steps, n_paths, seed)


@pytest.fixture(scope="module")
def self_target():
    return simulated_stats(true_model_scenarios(), 0.05, 20, burn_in=250)


class TestFixedParams:
    def test_constants(self):
        fp = FixedParams(g=0.0, sigma_F=0.01, sigma=0.001, rho=-0.3, mu=0.0)
        assert fp.alpha == 1.0 / 6.0
        assert fp.gamma == 10.0

    def test_pure_drift_series(self):
        prices = 100.0 * np.exp(0.001 * np.arange(200))
        fp = fixed_params_from_history(prices)
        assert fp.degenerate
        assert fp.sigma_F == 0.0 and fp.sigma == 0.0
        assert fp.g == pytest.approx(0.001, abs=1e-9)

    def test_drift_with_noise(self):
        sc = simulate_gbm(0.0015, 0.01, 100.0, 50000, 1, 12)
        fp = fixed_params_from_history(sc.paths[0])
        assert fp.g == pytest.approx(0.0015 - 0.5 * 0.01 ** 2, abs=3 * 0.01 / math.sqrt(50000))
        assert fp.sigma_F == pytest.approx(0.01, rel=0.02)
        assert fp.mu == pytest.approx(0.0015, abs=3 * 0.01 / math.sqrt(50000))

    def test_rho_oracle(self):
        # simulate-and-estimate: known correlation recovered within 0.15
        sc = simulate_heston(2e-4, 1.2e-4, 0.03, 1.2e-4, 0.004, -0.7,
                             100.0, 100000, 1, 2718)
        fp = fixed_params_from_history(sc.paths[0])
        assert fp.rho < 0
        assert abs(fp.rho - (-0.7)) < 0.15

    def test_rho_zero_case(self):
        sc = simulate_heston(0.0, 1.2e-4, 0.03, 1.2e-4, 0.004, 0.0,
                             100.0, 100000, 1, 515)
        fp = fixed_params_from_history(sc.paths[0])
        assert abs(fp.rho) < 0.15

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fixed_params_from_history(np.linspace(100, 101, 20))

    def test_short_series_flags_degenerate_rho(self):
        rng = np.random.default_rng(0)
        prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, 60)))
        fp = fixed_params_from_history(prices)
        assert fp.degenerate and fp.rho == 0.0


class TestGridSpec:
    def test_empty_axis_rejected(self):
        with pytest.raises(ParameterError):
            GridSpec(axes={"kappa": []})

    def test_negative_theta_rejected(self):
        with pytest.raises(ParameterError):
            GridSpec(axes={"theta": [-0.1, 0.1]})

    def test_point_enumeration_lexicographic(self):
        grid = GridSpec(axes={"a": [1.0, 2.0], "b": [10.0, 20.0]})
        pts = list(grid.points())
        assert pts == [{"a": 1.0, "b": 10.0}, {"a": 1.0, "b": 20.0},
                       {"a": 2.0, "b": 10.0}, {"a": 2.0, "b": 20.0}]
        assert grid.n_points == 4


def small_grid(axes, seed=9, replications=2, n_paths=8, n_steps=1200):
    return GridSpec(axes=axes, replications=replications, n_paths=n_paths,
                    n_steps=n_steps, seed=seed, burn_in=250)


class TestGridSearch:
    def test_single_point_grid(self, self_target):
        grid = small_grid({"kappa": [0.08], "beta": [0.01], "omega": [1.0],
                           "theta": [THETA], "phi": [0.03]})
        res = grid_search_calibrate(grid, self_target, FIXED)
        assert len(res.table) == 1
        assert res.best_point == {"kappa": 0.08, "beta": 0.01, "omega": 1.0,
                                  "theta": THETA, "phi": 0.03}
        assert res.best_distance == res.table[0].mean_distance
        assert math.isfinite(res.best_distance)

    def test_exhaustive_table(self, self_target):
        grid = small_grid({"kappa": [0.05, 0.08], "beta": [0.01],
                           "omega": [0.7, 1.0], "theta": [THETA],
                           "phi": [0.03, 0.3]}, n_steps=800)
        res = grid_search_calibrate(grid, self_target, FIXED)
        assert len(res.table) == grid.n_points == 8
        assert res.best_distance == min(r.mean_distance for r in res.table)
        assert [r.index for r in res.table] == list(range(8))

    def test_self_calibration_selects_truth(self, self_target):
        grid = small_grid({"kappa": [0.02, 0.08], "beta": [0.01],
                           "omega": [0.5, 1.0], "theta": [THETA],
                           "phi": [0.03, 0.2]},
                          n_paths=16, n_steps=3000, replications=2)
        res = grid_search_calibrate(grid, self_target, FIXED)
        assert res.best_point["kappa"] == TRUE_POINT["kappa"]
        assert res.best_point["omega"] == TRUE_POINT["omega"]
        assert res.best_point["phi"] == TRUE_POINT["phi"]
        assert res.best_distance <= 0.15
        # statistical form: best within 2 replication-std of the true point
        true_row = [r for r in res.table if r.point == TRUE_POINT][0]
        assert res.best_distance <= true_row.mean_distance + 2 * max(
            true_row.std_distance, 1e-9)
        # full parameter object assembled with fixed values
        assert res.best_params.alpha == ALPHA_FIXED
        assert res.best_params.gamma == GAMMA_FIXED
        assert res.best_params.rho == FIXED.rho

    def test_reproducible_bit_for_bit(self, self_target):
        grid = small_grid({"kappa": [0.05, 0.08], "beta": [0.01],
                           "omega": [1.0], "theta": [THETA], "phi": [0.03]},
                          n_steps=600)
        a = grid_search_calibrate(grid, self_target, FIXED)
        b = grid_search_calibrate(grid, self_target, FIXED)
        assert a.best_distance == b.best_distance
        assert [r.mean_distance for r in a.table] == [r.mean_distance for r in b.table]

    def test_weight_scale_invariance(self, self_target):
        grid = small_grid({"kappa": [0.02, 0.08], "beta": [0.01],
                           "omega": [1.0], "theta": [THETA], "phi": [0.03, 0.3]},
                          n_steps=800)
        a = grid_search_calibrate(grid, self_target, FIXED,
                                  DistanceWeights(1, 1, 1, 1))
        b = grid_search_calibrate(grid, self_target, FIXED,
                                  DistanceWeights(2.5, 2.5, 2.5, 2.5))
        assert a.best_point == b.best_point
        assert b.best_distance == pytest.approx(2.5 * a.best_distance, rel=1e-12)

    def test_failed_point_recorded_continues(self, self_target):
        # beta large enough to overflow the feedback loop
        grid = small_grid({"kappa": [0.08], "beta": [0.01, 1e9],
                           "omega": [1.0], "theta": [THETA], "phi": [0.03]},
                          n_steps=600)
        res = grid_search_calibrate(grid, self_target, FIXED)
        bad = [r for r in res.table if r.point["beta"] == 1e9][0]
        assert math.isinf(bad.mean_distance)
        assert bad.error
        assert math.isfinite(res.best_distance)

    def test_parallel_matches_serial(self, self_target):
        grid = small_grid({"kappa": [0.05, 0.08], "beta": [0.01],
                           "omega": [0.8, 1.0], "theta": [THETA], "phi": [0.03]},
                          n_steps=600)
        sim = _FullModelSimulator(fixed=FIXED, n_paths=grid.n_paths,
                                  n_steps=grid.n_steps)
        best1, table1 = grid_search(grid, sim, self_target, n_workers=1)
        best4, table4 = grid_search(grid, sim, self_target, n_workers=4)
        assert best1.index == best4.index
        assert [r.mean_distance for r in table1] == [r.mean_distance for r in table4]

    def test_missing_axis_rejected(self, self_target):
        with pytest.raises(ParameterError):
            grid_search_calibrate(small_grid({"kappa": [0.1]}), self_target, FIXED)


class TestBaselineCalibrations:
    def test_gbm_recovers_volatility(self):
        data = simulate_gbm(2e-4, 0.011, 100.0, 3000, 8, 77)
        target = simulated_stats(data, 0.05, 20, burn_in=0)
        grid = GridSpec(axes={"mu": [2e-4], "sigma": [0.006, 0.011, 0.02]},
                        replications=2, n_paths=8, n_steps=2000, seed=5,
                        burn_in=0)
        res = calibrate_gbm(grid, target)
        assert res.best_point["sigma"] == 0.011
        assert res.model_tag == "gbm"
        assert set(res.best_params) == {"mu", "sigma"}

    def test_heston_baseline_runs(self):
        data = simulate_heston(2e-4, THETA, 0.03, THETA, 0.004, -0.5,
                               100.0, 3000, 8, 78)
        target = simulated_stats(data, 0.05, 20, burn_in=0)
        grid = GridSpec(axes={"theta": [THETA / 2, THETA], "phi": [0.03, 0.3]},
                        replications=2, n_paths=8, n_steps=2000, seed=6,
                        burn_in=0)
        res = calibrate_heston(grid, target, FIXED)
        assert len(res.table) == 4
        assert res.best_params["mu"] == FIXED.mu
        assert res.best_params["var0"] == res.best_point["theta"]

    def test_extended_chiarella_baseline_runs(self):
        data = true_model_scenarios(n_steps=2000, n_paths=8, seed=3)
        target = simulated_stats(data, 0.05, 20, burn_in=250)
        grid = GridSpec(axes={"kappa": [0.08], "beta": [0.01],
                              "sigma_N": [0.006, 0.011]},
                        replications=2, n_paths=8, n_steps=2000, seed=7)
        res = calibrate_extended_chiarella(grid, target, FIXED)
        assert len(res.table) == 2
        assert res.best_params["gamma"] == GAMMA_FIXED
