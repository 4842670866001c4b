"""Command-line front end.

Subcommands:
  train               full training run, artifacts under --out-dir
  eval                greedy rollouts from a checkpoint, metrics files
  channel-table       error-rate surface over (distance, duration)
  symmetry            lag-one reciprocity of attention weights
  calibrate-altitude  search the altitude band for a coverage radius

Every subcommand takes --config (flat key/value file; missing keys
fall back to defaults) plus the shared mode flags --baseline,
--no-exchange, and --exchange-raw, which override the policy section.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import channel
from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, format_float
from .evaluate import run_eval, write_channel_table

__all__ = ["main", "build_parser"]


def _add_common(sub: argparse.ArgumentParser, with_seed: bool = True) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="flat key/value config file (defaults if omitted)")
    sub.add_argument("--out-dir", type=Path, required=True,
                     help="directory for output artifacts")
    if with_seed:
        sub.add_argument("--seed", type=int, default=None,
                         help="override the run seed")
    sub.add_argument("--baseline", action="store_true",
                     help="mixer-only learner: no attention, no exchange")
    sub.add_argument("--no-exchange", action="store_true",
                     help="keep the full architecture but zero all inboxes")
    sub.add_argument("--exchange-raw", action="store_true",
                     help="broadcast raw attention weights instead of the "
                          "recurrent readout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaxnet",
        description="multi-agent tracking with attention-weight exchange")
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="run training")
    _add_common(p_train)

    p_eval = subs.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--episodes", type=int, default=20)

    p_table = subs.add_parser("channel-table",
                              help="error-rate surface as CSV")
    _add_common(p_table, with_seed=False)
    p_table.add_argument("--d-min", type=float, default=100.0)
    p_table.add_argument("--d-max", type=float, default=3000.0)
    p_table.add_argument("--d-steps", type=int, default=30)
    p_table.add_argument("--t-min", type=float, default=5.0e-6)
    p_table.add_argument("--t-max", type=float, default=1.0e-4)
    p_table.add_argument("--t-steps", type=int, default=20)

    p_sym = subs.add_parser("symmetry",
                            help="attention reciprocity of a checkpoint")
    _add_common(p_sym)
    p_sym.add_argument("--checkpoint", type=Path, required=True)
    p_sym.add_argument("--episodes", type=int, default=10)

    p_cal = subs.add_parser("calibrate-altitude",
                            help="altitude giving a wanted coverage radius")
    _add_common(p_cal, with_seed=False)
    p_cal.add_argument("--target-range", type=float, default=None,
                       help="coverage radius in meters "
                            "(default: env.urllc_range)")
    return parser


def _load_config(args) -> RunConfig:
    cfg = (RunConfig.from_file(args.config) if args.config is not None
           else RunConfig())
    return cfg.with_mode(baseline=args.baseline,
                         no_exchange=args.no_exchange,
                         exchange_raw=args.exchange_raw)


def _cmd_train(args) -> int:
    from .training import train  # trainer stays out of execution imports

    cfg = _load_config(args)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    result = train(cfg, args.out_dir)
    print(f"trained {result.iterations} iterations "
          f"-> {result.checkpoint_path}")
    if result.final_loss is not None:
        print(f"final loss {format_float(result.final_loss)}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    seed = 0 if args.seed is None else args.seed
    result = run_eval(args.checkpoint, cfg, args.episodes, seed,
                      args.out_dir)
    print(json.dumps(result.summary, indent=2))
    return 0


def _cmd_channel_table(args) -> int:
    cfg = _load_config(args)
    distances = np.linspace(args.d_min, args.d_max, args.d_steps)
    durations = np.linspace(args.t_min, args.t_max, args.t_steps)
    path = write_channel_table(cfg, distances, durations,
                               Path(args.out_dir) / "channel_table.csv")
    print(f"wrote {path}")
    return 0


def _cmd_symmetry(args) -> int:
    cfg = _load_config(args)
    seed = 0 if args.seed is None else args.seed
    result = run_eval(args.checkpoint, cfg, args.episodes, seed,
                      args.out_dir)
    report = {
        "episodes": args.episodes,
        "symmetry_mse_mean": result.summary["symmetry_mse_mean"],
        "symmetry_mse_per_episode": result.summary["symmetry_mse_per_episode"],
        "symmetry_max_diff": result.summary["symmetry_max_diff"],
    }
    out = Path(args.out_dir) / "symmetry.json"
    out.write_text(json.dumps(report, indent=2), encoding="utf-8")
    print(json.dumps(report, indent=2))
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    target = (cfg.env.urllc_range if args.target_range is None
              else args.target_range)
    result = channel.calibrate_altitude(
        target, cfg.requirement.target_error, cfg.channel.t_max, cfg.channel)
    report = dataclasses.asdict(result)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(json.dumps(report, indent=2),
                                          encoding="utf-8")
    print(json.dumps(report, indent=2))
    return 0 if result.achieved else 3


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "channel-table": _cmd_channel_table,
    "symmetry": _cmd_symmetry,
    "calibrate-altitude": _cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
