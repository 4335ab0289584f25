"""Command-line trainer: scenario file in, policy weights JSON out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .ddpg import TrainerConfig, train
from .scenario import ScenarioFormatError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chtrainer",
        description="Train a deep hedging policy on an exported scenario file.")
    p.add_argument("--scenarios", required=True, help="scenario binary (.chsc)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pi", type=float, default=0.01,
                   help="proportional transaction cost")
    p.add_argument("--risk-c", type=float, default=1.5)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--episodes-per-epoch", type=int, default=8)
    p.add_argument("--updates-per-epoch", type=int, default=32)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--actor-lr", type=float, default=1e-4)
    p.add_argument("--critic-lr", type=float, default=1e-3)
    p.add_argument("--noise-start", type=float, default=10.0)
    p.add_argument("--noise-final", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=0.005)
    p.add_argument("--holdout-fraction", type=float, default=0.1)
    p.add_argument("--strike", type=float, default=None)
    p.add_argument("--pricing-vol", type=float, default=None)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainerConfig(
        pi=args.pi, risk_c=args.risk_c, epochs=args.epochs,
        episodes_per_epoch=args.episodes_per_epoch,
        updates_per_epoch=args.updates_per_epoch, batch_size=args.batch_size,
        actor_lr=args.actor_lr, critic_lr=args.critic_lr,
        noise_start=args.noise_start, noise_final=args.noise_final,
        tau=args.tau, holdout_fraction=args.holdout_fraction,
        strike=args.strike, pricing_vol=args.pricing_vol, rate=args.rate,
        seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = train(args.scenarios, cfg,
                       weights_path=out / "weights.json",
                       log_path=out / "training_log.csv")
    except (ScenarioFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result.aborted:
        print(f"training aborted ({result.aborted}); "
              f"last good checkpoint exported", file=sys.stderr)
    print(f"best objective {result.best_objective:.2f} (epoch "
          f"{result.best_epoch}) vs delta hedging {result.delta_objective:.2f} "
          f"on the held-out slice")
    print(f"wrote {out / 'weights.json'} and {out / 'training_log.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
