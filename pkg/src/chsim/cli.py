"""Command-line entry point for the full pipeline.

Subcommands: simulate, stats, calibrate, validate, export-training-set,
hedge-eval.  Every run writes its outputs plus a manifest.json (resolved
config, seed, input hashes, output list, wall-clock duration) into --out.
All randomness derives from the single --seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import report
from .calibration import (
    GridSpec,
    calibrate_extended_chiarella,
    calibrate_gbm,
    calibrate_heston,
    default_grid,
    fixed_params_from_history,
    grid_search_calibrate,
)
from .config import default_config, default_model_params, merge_config
from .data_io import (
    dump_json,
    ingest_csv,
    load_json,
    load_policy_weights,
    load_toml,
    read_scenarios,
    save_stats,
    sha256_file,
    target_to_dict,
    write_scenarios,
    write_scenarios_csv,
)
from .errors import ChsimError, ParameterError
from .hedging import OptionSpec, evaluate_policy
from .philox import derive_seed
from .simulator import (
    ALL_MODELS,
    InitialState,
    ModelParams,
    MODEL_CHIARELLA_HESTON,
    MODEL_EXTENDED_CHIARELLA,
    MODEL_GBM,
    MODEL_HESTON,
    simulate_chiarella_heston,
    simulate_extended_chiarella,
    simulate_gbm,
    simulate_heston,
)
from .stylized_facts import (
    DistanceWeights,
    log_returns,
    realized_volatility,
    reference_stats,
    simulated_stats,
)
from .validation import GslDivConfig, gsl_div_sample, welch_t_test


class _Run:
    """Collects inputs/outputs of one subcommand and writes the manifest."""

    def __init__(self, subcommand: str, out_dir: str, config: dict, seed=None):
        self.subcommand = subcommand
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.seed = seed
        self.inputs = {}
        self.outputs = []
        self.t0 = time.monotonic()

    def add_input(self, path) -> str:
        p = str(path)
        self.inputs[p] = sha256_file(p)
        return p

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(str(p))
        return p

    def finish(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "input_hashes": self.inputs,
            "outputs": self.outputs,
            "duration_seconds": round(time.monotonic() - self.t0, 3),
        }
        dump_json(manifest, self.out / "manifest.json")


def _resolve_config(args) -> dict:
    cfg = default_config()
    if getattr(args, "config", None):
        cfg = merge_config(load_toml(args.config))
    return cfg


def _load_model_params(args, run: _Run, model: str) -> dict:
    """Parameter dict for a model: --params file (plain or calibration) or defaults."""
    if getattr(args, "params", None):
        run.add_input(args.params)
        doc = load_json(args.params)
        if isinstance(doc, dict) and "best_params" in doc:
            file_model = doc.get("model_tag")
            if file_model and file_model != model:
                raise ParameterError(
                    f"params file calibrates {file_model!r}, not {model!r}")
            doc = doc["best_params"]
        if not isinstance(doc, dict):
            raise ParameterError("params file must hold a parameter table")
        known = set(default_model_params(model))
        extra = set(doc) - known - {"p0", "f0", "m0", "var0"}
        if extra:
            raise ParameterError(f"unknown parameter {sorted(extra)[0]!r} for {model}")
        return {**default_model_params(model), **doc}
    return default_model_params(model)


def _simulate(model: str, params: dict, cfg: dict, n_paths: int, n_steps: int,
              seed: int):
    price0 = cfg["simulator"]["initial_price"]
    p0 = math.log(price0)
    m0 = cfg["simulator"]["m0"]
    if model == MODEL_GBM:
        return simulate_gbm(params["mu"], params["sigma"], price0,
                            n_steps, n_paths, seed)
    if model == MODEL_HESTON:
        return simulate_heston(params["mu"], params["var0"], params["phi"],
                               params["theta"], params["sigma"], params["rho"],
                               price0, n_steps, n_paths, seed)
    if model == MODEL_EXTENDED_CHIARELLA:
        init = InitialState(p0=params.get("p0", p0), f0=params.get("f0", p0),
                            m0=params.get("m0", m0), var0=0.0)
        return simulate_extended_chiarella(
            params["kappa"], params["beta"], params["gamma"], params["sigma_N"],
            params["g"], params["sigma_F"], params["alpha"], init,
            n_steps, n_paths, seed)
    if model == MODEL_CHIARELLA_HESTON:
        mp = ModelParams(**{k: params[k] for k in (
            "kappa", "beta", "gamma", "omega", "g", "sigma_F", "alpha",
            "phi", "theta", "sigma", "rho")})
        init = InitialState(p0=params.get("p0", p0), f0=params.get("f0", p0),
                            m0=params.get("m0", m0),
                            var0=params.get("var0", params["theta"]))
        return simulate_chiarella_heston(mp, init, n_steps, n_paths, seed)
    raise ParameterError(f"unknown model {model!r}")


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    run = _Run("simulate", args.out, cfg, seed=args.seed)
    params = _load_model_params(args, run, args.model)
    scenarios = _simulate(args.model, params, cfg, args.paths, args.steps, args.seed)
    write_scenarios(scenarios, run.path("scenarios.chsc"))
    if args.csv:
        write_scenarios_csv(scenarios, run.path("scenarios.csv"))
    run.finish()
    print(f"wrote {scenarios.n_paths} x {scenarios.n_steps + 1} {args.model} "
          f"paths to {run.out / 'scenarios.chsc'}")
    return 0


def cmd_stats(args) -> int:
    cfg = _resolve_config(args)
    sf = cfg["stylized_facts"]
    run = _Run("stats", args.out, cfg)
    if bool(args.data) == bool(args.scenarios):
        raise ParameterError("provide exactly one of --data or --scenarios")
    if args.data:
        history = ingest_csv(run.add_input(args.data),
                             date_column=args.date_column,
                             close_column=args.close_column)
        stats = reference_stats(history.closes, sf["tail_fraction"], sf["max_lag"])
        label = Path(args.data).stem
    else:
        scenarios = read_scenarios(run.add_input(args.scenarios))
        burn = args.burn_in if args.burn_in is not None else cfg["simulator"]["burn_in"]
        if burn >= scenarios.n_steps:
            burn = 0
        stats = simulated_stats(scenarios, sf["tail_fraction"], sf["max_lag"], burn)
        label = scenarios.model_tag
    save_stats(stats, run.path("stats.json"))
    with open(run.path("acf.csv"), "w") as fh:
        fh.write("lag,acf_returns,acf_sq_returns\n")
        for i in range(stats.max_lag):
            fh.write(f"{i + 1},{stats.acf_returns[i]!r},{stats.acf_sq_returns[i]!r}\n")
    report.acf_figure({label: stats}, run.path("stats_acf.png"))
    run.finish()
    print(json.dumps(target_to_dict(stats), indent=2))
    return 0


def _axis_levels(name: str, value):
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    if isinstance(value, dict):
        unknown = set(value) - {"min", "max", "levels", "step", "spacing"}
        if unknown:
            raise ParameterError(f"axis {name}: unknown key {sorted(unknown)[0]!r}")
        lo, hi = float(value["min"]), float(value["max"])
        if "step" in value:
            return list(np.arange(lo, hi + 1e-12, float(value["step"])))
        levels = int(value.get("levels", 5))
        if value.get("spacing", "log") == "linear":
            return list(np.linspace(lo, hi, levels))
        return list(np.geomspace(lo, hi, levels))
    raise ParameterError(f"axis {name}: expected levels array or {{min,max,...}}")


def _grid_from_toml(path, seed: int, cfg: dict) -> GridSpec:
    doc = load_toml(path)
    axes = {name: _axis_levels(name, levels)
            for name, levels in doc.get("axes", {}).items()}
    grid_cfg = doc.get("grid", {})
    cal = cfg["calibration"]
    return GridSpec(
        axes=axes,
        replications=int(grid_cfg.get("replications", cal["replications"])),
        n_paths=int(grid_cfg.get("n_paths", cal["n_paths"])),
        n_steps=int(grid_cfg.get("n_steps", cal["n_steps"])),
        seed=seed,
        burn_in=int(grid_cfg.get("burn_in", cfg["simulator"]["burn_in"])))


def _default_baseline_grid(model: str, fixed, data_vol: float, cal: dict,
                           seed: int, burn_in: int) -> GridSpec:
    common = dict(replications=cal["replications"], n_paths=cal["n_paths"],
                  n_steps=cal["n_steps"], seed=seed, burn_in=burn_in)
    sf2 = max(fixed.sigma_F ** 2, 1e-10)
    if model == MODEL_GBM:
        axes = {"mu": [fixed.mu],
                "sigma": list(np.geomspace(data_vol / 2, 2 * data_vol, 7))}
    elif model == MODEL_HESTON:
        axes = {"theta": list(np.geomspace(sf2 / 4, 4 * sf2, cal["theta_levels"])),
                "phi": list(np.geomspace(cal["phi_min"], cal["phi_max"],
                                         cal["phi_levels"]))}
    elif model == MODEL_EXTENDED_CHIARELLA:
        axes = {"kappa": list(np.geomspace(cal["kappa_min"], cal["kappa_max"],
                                           cal["kappa_levels"])),
                "beta": list(np.geomspace(cal["beta_min"], cal["beta_max"],
                                          cal["beta_levels"])),
                "sigma_N": list(np.geomspace(data_vol / 2, 2 * data_vol, 6))}
    else:
        raise ParameterError(f"no baseline grid for {model!r}")
    return GridSpec(axes=axes, **common)


def cmd_calibrate(args) -> int:
    cfg = _resolve_config(args)
    sf = cfg["stylized_facts"]
    cal = cfg["calibration"]
    run = _Run("calibrate", args.out, cfg, seed=args.seed)
    history = ingest_csv(run.add_input(args.data),
                         date_column=args.date_column,
                         close_column=args.close_column)
    closes = history.closes
    if args.calibration_len:
        if len(closes) < args.calibration_len:
            raise ParameterError(
                f"history has {len(closes)} rows < --calibration-len")
        closes = closes[:args.calibration_len]
    target = reference_stats(closes, sf["tail_fraction"], sf["max_lag"])
    fixed = fixed_params_from_history(closes, cal["vol_window"])
    weights = DistanceWeights(w1=sf["w1"], w2=sf["w2"], w3=sf["w3"], w4=sf["w4"])
    data_vol = realized_volatility(log_returns(closes))
    if args.grid:
        run.add_input(args.grid)
        grid = _grid_from_toml(args.grid, args.seed, cfg)
    elif args.model == MODEL_CHIARELLA_HESTON:
        grid = default_grid(fixed, replications=cal["replications"],
                            n_paths=cal["n_paths"], n_steps=cal["n_steps"],
                            seed=args.seed, burn_in=cfg["simulator"]["burn_in"])
    else:
        grid = _default_baseline_grid(args.model, fixed, data_vol, cal,
                                      args.seed, cfg["simulator"]["burn_in"])
    price0 = cfg["simulator"]["initial_price"]
    if args.model == MODEL_CHIARELLA_HESTON:
        result = grid_search_calibrate(grid, target, fixed, weights,
                                       init_price=price0, n_workers=args.threads)
    elif args.model == MODEL_GBM:
        result = calibrate_gbm(grid, target, weights, init_price=price0,
                               n_workers=args.threads)
    elif args.model == MODEL_HESTON:
        result = calibrate_heston(grid, target, fixed, weights,
                                  init_price=price0, n_workers=args.threads)
    else:
        result = calibrate_extended_chiarella(grid, target, fixed, weights,
                                              init_price=price0,
                                              n_workers=args.threads)
    best = result.best_params
    best_dict = best if isinstance(best, dict) else best.__dict__
    doc = {
        "model_tag": result.model_tag,
        "best_params": dict(best_dict),
        "best_point": result.best_point,
        "best_distance": result.best_distance,
        "provenance": result.provenance,
        "fixed_params": {
            "g": fixed.g, "sigma_F": fixed.sigma_F, "sigma": fixed.sigma,
            "rho": fixed.rho, "mu": fixed.mu, "alpha": fixed.alpha,
            "gamma": fixed.gamma, "degenerate": fixed.degenerate},
        "target": target_to_dict(target),
        "table": [
            {"index": row.index, "point": row.point,
             "mean_distance": row.mean_distance,
             "std_distance": row.std_distance,
             "distances": row.distances, "error": row.error}
            for row in result.table
        ],
    }
    dump_json(doc, run.path("calibration.json"))
    axis_names = list(grid.axes.keys())
    with open(run.path("table.csv"), "w") as fh:
        fh.write("index," + ",".join(axis_names) + ",mean_distance,std_distance,error\n")
        for row in result.table:
            cells = [str(row.index)] + [repr(row.point[n]) for n in axis_names]
            cells += [repr(row.mean_distance), repr(row.std_distance),
                      row.error or ""]
            fh.write(",".join(cells) + "\n")
    run.finish()
    print(f"best {result.model_tag} point: {result.best_point} "
          f"distance {result.best_distance:.6f}")
    return 0


def cmd_validate(args) -> int:
    cfg = _resolve_config(args)
    g = cfg["gsl_div"]
    run = _Run("validate", args.out, cfg)
    ref = ingest_csv(run.add_input(args.ref), date_column=args.date_column,
                     close_column=args.close_column)
    gconf = GslDivConfig(n_symbols=g["n_symbols"],
                         word_lengths=tuple(range(1, g["word_length_max"] + 1)))
    sc_a = read_scenarios(run.add_input(args.a))
    sc_b = read_scenarios(run.add_input(args.b))
    samples_a = gsl_div_sample(sc_a, ref.closes, gconf)
    samples_b = gsl_div_sample(sc_b, ref.closes, gconf)
    test = welch_t_test(samples_a, samples_b)
    doc = {
        "mean_a": float(samples_a.mean()),
        "mean_b": float(samples_b.mean()),
        "t": test.t_statistic,
        "p": test.p_value,
        "samples_a": [float(v) for v in samples_a],
        "samples_b": [float(v) for v in samples_b],
        "label_a": sc_a.model_tag,
        "label_b": sc_b.model_tag,
    }
    dump_json(doc, run.path("validation.json"))
    report.divergence_histogram(
        {sc_a.model_tag: samples_a, sc_b.model_tag: samples_b},
        run.path("gsl_hist.png"))
    run.finish()
    print(f"mean divergence: {doc['mean_a']:.4f} ({sc_a.model_tag}) vs "
          f"{doc['mean_b']:.4f} ({sc_b.model_tag}); t={test.t_statistic:.3f} "
          f"p={test.p_value:.3g}")
    return 0


def cmd_export_training_set(args) -> int:
    cfg = _resolve_config(args)
    run = _Run("export-training-set", args.out, cfg, seed=args.seed)
    model = args.model
    if args.calibration:
        run.add_input(args.calibration)
        doc = load_json(args.calibration)
        model = doc.get("model_tag", model)
        params = {**default_model_params(model), **doc["best_params"]}
    else:
        params = _load_model_params(args, run, model)
    n_steps = args.steps if args.steps else cfg["hedging"]["maturity_days"]
    m = args.n_scenarios if args.n_scenarios else cfg["export"]["n_scenarios"]
    scenarios = _simulate(model, params, cfg, m, n_steps, args.seed)
    write_scenarios(scenarios, run.path("training.chsc"))
    run.finish()
    print(f"wrote {m} x {n_steps + 1} {model} training paths to "
          f"{run.out / 'training.chsc'}")
    return 0


def cmd_hedge_eval(args) -> int:
    cfg = _resolve_config(args)
    hed = cfg["hedging"]
    run = _Run("hedge-eval", args.out, cfg, seed=args.seed)
    maturity = hed["maturity_days"]
    if args.scenarios:
        scenarios = read_scenarios(run.add_input(args.scenarios))
    else:
        params = _load_model_params(args, run, args.model)
        scenarios = _simulate(args.model, params, cfg, args.paths, maturity,
                              args.seed)
    if scenarios.n_steps != maturity:
        raise ParameterError(
            f"scenarios have {scenarios.n_steps} steps; maturity is {maturity}")
    strike = args.strike if args.strike else float(np.mean(scenarios.paths[:, 0]))
    if args.pricing_vol:
        vol = args.pricing_vol
    else:
        vol = float(np.mean([realized_volatility(log_returns(row))
                             for row in scenarios.paths]))
    option = OptionSpec(strike=strike, pricing_vol=vol,
                        maturity_days=maturity, rate=args.rate)
    costs = [float(c) for c in args.costs.split(",")] if args.costs \
        else list(hed["cost_levels"])
    if args.policy == "delta":
        policy = "delta"
        policy_tag = "delta"
    else:
        policy = load_policy_weights(run.add_input(args.policy))
        policy_tag = Path(args.policy).stem
    es_conf = args.es_confidence if args.es_confidence else hed["es_confidence"]
    result = evaluate_policy(policy, scenarios, option, costs, es_conf)
    doc = {
        "policy": policy_tag,
        "option": {"strike": option.strike, "pricing_vol": option.pricing_vol,
                   "maturity_days": option.maturity_days, "rate": option.rate,
                   "contract_multiplier": option.contract_multiplier},
        "es_confidence": es_conf,
        "n_scenarios": scenarios.n_paths,
        "levels": [
            {"cost": lv.cost, "mean_pnl": lv.mean_pnl, "pnl_std": lv.pnl_std,
             "expected_shortfall": lv.expected_shortfall,
             "expected_shortfall_pct": lv.expected_shortfall_pct,
             "premium": lv.premium}
            for lv in result.levels
        ],
    }
    dump_json(doc, run.path("report.json"))
    with open(run.path("pnl.csv"), "w") as fh:
        fh.write("episode," + ",".join(f"cost_{lv.cost!r}" for lv in result.levels) + "\n")
        for i in range(scenarios.n_paths):
            fh.write(str(i) + "," + ",".join(repr(float(lv.pnls[i]))
                                             for lv in result.levels) + "\n")
    report.pnl_histogram(
        {f"{policy_tag} @ {lv.cost:g}": lv.pnls for lv in result.levels},
        run.path("pnl_hist.png"))
    run.finish()
    for lv in result.levels:
        print(f"cost {lv.cost:g}: mean P&L {lv.mean_pnl:.2f}, std {lv.pnl_std:.2f}, "
              f"ES {lv.expected_shortfall_pct:.2f}% of premium")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chsim",
        description="Market simulation, stylized-facts calibration, and "
                    "option-hedging evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="TOML config overriding defaults")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="generate a scenario file")
    common(p)
    p.add_argument("--model", choices=ALL_MODELS, default=MODEL_CHIARELLA_HESTON)
    p.add_argument("--paths", type=int, default=10)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--params", help="JSON parameter file or calibration result")
    p.add_argument("--csv", action="store_true", help="also write CSV paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="stylized-fact statistics of data or scenarios")
    common(p, seed=False)
    p.add_argument("--data", help="historical price CSV")
    p.add_argument("--scenarios", help="scenario binary")
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--date-column", default="date")
    p.add_argument("--close-column", default="close")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("calibrate", help="grid-search calibration against a price CSV")
    common(p)
    p.add_argument("--data", required=True, help="historical price CSV")
    p.add_argument("--model", choices=ALL_MODELS, default=MODEL_CHIARELLA_HESTON)
    p.add_argument("--grid", help="TOML grid specification")
    p.add_argument("--calibration-len", type=int, default=None,
                   help="use only the first N rows")
    p.add_argument("--threads", type=int, default=max(1, os.cpu_count() or 1),
                   help="worker processes for the grid search")
    p.add_argument("--date-column", default="date")
    p.add_argument("--close-column", default="close")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="divergence comparison of two scenario sets")
    common(p, seed=False)
    p.add_argument("--a", required=True, help="scenario binary A")
    p.add_argument("--b", required=True, help="scenario binary B")
    p.add_argument("--ref", required=True, help="reference price CSV")
    p.add_argument("--date-column", default="date")
    p.add_argument("--close-column", default="close")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-training-set",
                       help="scenario file sized for policy training")
    common(p)
    p.add_argument("--model", choices=ALL_MODELS, default=MODEL_CHIARELLA_HESTON)
    p.add_argument("--calibration", help="calibration result JSON")
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--n-scenarios", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_export_training_set)

    p = sub.add_parser("hedge-eval", help="evaluate a hedging policy over scenarios")
    common(p)
    p.add_argument("--scenarios", help="scenario binary (one option lifetime per row)")
    p.add_argument("--model", choices=ALL_MODELS, default=MODEL_CHIARELLA_HESTON)
    p.add_argument("--params", help="JSON parameter file for --model")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--policy", default="delta",
                   help="'delta' or a policy weights JSON path")
    p.add_argument("--costs", help="comma-separated proportional cost levels")
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--pricing-vol", type=float, default=None)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--es-confidence", type=float, default=None)
    p.set_defaults(func=cmd_hedge_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ChsimError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
