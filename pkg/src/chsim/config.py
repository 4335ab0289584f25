"""Defaults for every tunable named across the toolkit, plus TOML overrides.

A config file provides sections mirroring these defaults; only known keys are
accepted so typos surface instead of silently reverting to defaults.
"""

from __future__ import annotations

import copy
import math

from .errors import ParameterError
from .simulator import (
    MODEL_CHIARELLA_HESTON,
    MODEL_EXTENDED_CHIARELLA,
    MODEL_GBM,
    MODEL_HESTON,
)

DEFAULTS = {
    "simulator": {
        # Deterministic fixed point: start at price 100 with momentum 0 and
        # the variance at its long-run level; drop early transients.
        "initial_price": 100.0,
        "m0": 0.0,
        "burn_in": 250,
    },
    "stylized_facts": {
        "tail_fraction": 0.05,
        "max_lag": 20,
        "w1": 1.0,
        "w2": 1.0,
        "w3": 1.0,
        "w4": 1.0,
    },
    "calibration": {
        "vol_window": 30,
        "replications": 3,
        "n_paths": 16,
        "n_steps": 3000,
        "kappa_min": 0.01, "kappa_max": 0.5, "kappa_levels": 6,
        "beta_min": 0.01, "beta_max": 1.0, "beta_levels": 6,
        "omega_min": 0.1, "omega_max": 3.0, "omega_levels": 6,
        "theta_levels": 5,   # spans sigma_F^2/4 .. 4*sigma_F^2
        "phi_min": 0.01, "phi_max": 0.5, "phi_levels": 5,
    },
    "gsl_div": {
        "n_symbols": 5,
        "word_length_max": 6,
    },
    "hedging": {
        "maturity_days": 30,
        "rate": 0.0,
        "es_confidence": 0.95,
        "cost_levels": [0.0001, 0.001, 0.002, 0.004, 0.006, 0.01],
        "test_window": 30,
        "initial_price": 100.0,
    },
    "export": {
        "n_scenarios": 50000,
    },
}

# Built-in parameter sets used when no calibration result is supplied.  Chosen
# so the full model shows volatility clustering and fat tails at realistic
# daily volatility while the baselines match its unconditional scale.
DEFAULT_MODEL_PARAMS = {
    MODEL_CHIARELLA_HESTON: {
        "kappa": 0.08, "beta": 0.01, "gamma": 10.0, "omega": 1.0,
        "g": 2e-4, "sigma_F": 0.005, "alpha": 1.0 / 6.0,
        "phi": 0.03, "theta": 1.2e-4, "sigma": 0.004, "rho": -0.5,
    },
    MODEL_EXTENDED_CHIARELLA: {
        "kappa": 0.08, "beta": 0.01, "gamma": 10.0, "sigma_N": 0.011,
        "g": 2e-4, "sigma_F": 0.005, "alpha": 1.0 / 6.0,
    },
    MODEL_HESTON: {
        "mu": 2e-4, "var0": 1.2e-4, "phi": 0.03, "theta": 1.2e-4,
        "sigma": 0.004, "rho": -0.5,
    },
    MODEL_GBM: {
        "mu": 2e-4, "sigma": 0.011,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def merge_config(overrides: dict, base: dict = None) -> dict:
    """Overlay a parsed TOML document onto the defaults; unknown keys fail."""
    cfg = copy.deepcopy(base if base is not None else DEFAULTS)
    for section, values in overrides.items():
        if section not in cfg:
            raise ParameterError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ParameterError(f"config section {section!r} must be a table")
        for key, value in values.items():
            if key not in cfg[section]:
                raise ParameterError(f"unknown config key {section}.{key}")
            cfg[section][key] = value
    return cfg


def default_model_params(model_tag: str) -> dict:
    if model_tag not in DEFAULT_MODEL_PARAMS:
        raise ParameterError(f"unknown model tag {model_tag!r}")
    return dict(DEFAULT_MODEL_PARAMS[model_tag])


def log_initial_price(cfg: dict) -> float:
    return math.log(cfg["simulator"]["initial_price"])
