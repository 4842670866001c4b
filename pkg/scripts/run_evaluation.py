#!/usr/bin/env python3
"""Greedy evaluation of every trained cell under a training root.

Finds <root>/<cell>/checkpoint_final.json directories produced by
run_training.py, rolls each policy out greedily, and writes
metrics.csv, exchange.csv, and eval_summary.json under
<cell>/eval/. Prints one summary line per cell.
"""

import argparse
import sys
from pathlib import Path

from gaxnet.config import RunConfig
from gaxnet.evaluate import run_eval


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", type=Path, required=True,
                        help="directory holding the trained cells")
    parser.add_argument("--episodes", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    cells = sorted(p.parent for p in
                   args.root.glob("*/checkpoint_final.json"))
    if not cells:
        print(f"no trained cells under {args.root}", file=sys.stderr)
        return 1
    for cell in cells:
        cfg = RunConfig.from_file(cell / "config.txt")
        res = run_eval(cell / "checkpoint_final.json", cfg,
                       episodes=args.episodes, seed=args.seed,
                       out_dir=cell / "eval")
        s = res.summary
        print(f"{cell.name}: reward/ep {s['mean_reward_per_episode']:.2f}  "
              f"meets requirement {s['fraction_meeting_requirement']:.0%}  "
              f"collision pairs {s['collision_pairs_total']}  "
              f"reciprocity mse {s['symmetry_mse_mean']:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
