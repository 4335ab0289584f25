"""Agent-based market simulation, calibration, validation, and hedging toolkit."""

from .calibration import (
    CalibrationResult,
    FixedParams,
    GridSpec,
    default_grid,
    fixed_params_from_history,
    grid_search_calibrate,
)
from .errors import ChsimError
from .hedging import (
    CostLevel,
    HedgingEpisodeState,
    OptionSpec,
    PolicyWeights,
    bs_call_delta,
    bs_call_price,
    build_test_scenarios,
    delta_hedge_policy,
    env_step,
    episode_start,
    evaluate_policy,
    policy_forward,
)
from .simulator import (
    InitialState,
    ModelParams,
    ScenarioSet,
    correlated_normal_pair,
    simulate_chiarella_heston,
    simulate_extended_chiarella,
    simulate_gbm,
    simulate_heston,
)
from .stylized_facts import (
    DistanceWeights,
    StylizedFactsTarget,
    acf,
    hill_estimator,
    log_returns,
    realized_volatility,
    reference_stats,
    simulated_stats,
    stylized_facts_distance,
)
from .validation import GslDivConfig, gsl_div, gsl_div_sample, welch_t_test

__version__ = "0.1.0"
