#!/usr/bin/env python3
"""Train every cell of the study grid: three modes, several seeds.

Modes: exchange (the full model), attention-free (utility heads and
mixer only), and silent (full architecture, inboxes zeroed). Each cell
writes train.csv, trajectory.jsonl, checkpoints, run_manifest.json,
and the resolved config.txt under <out-root>/<mode>-s<seed>/.
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from gaxnet.config import RunConfig
from gaxnet.training import train

MODES = {
    "exchange": {},
    "attention-free": {"baseline": True},
    "silent": {"no_exchange": True},
}


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-root", type=Path, required=True)
    parser.add_argument("--config", type=Path, default=None,
                        help="base config file (defaults if omitted)")
    parser.add_argument("--modes", nargs="+", choices=sorted(MODES),
                        default=sorted(MODES))
    parser.add_argument("--seeds", nargs="+", type=int,
                        default=[0, 1, 2, 3])
    parser.add_argument("--iterations", type=int, default=1000)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    base = (RunConfig.from_file(args.config) if args.config
            else RunConfig())
    for mode in args.modes:
        for seed in args.seeds:
            cfg = base.with_mode(**MODES[mode])
            cfg = replace(cfg, train=replace(cfg.train,
                                             iterations=args.iterations,
                                             seed=seed))
            out = args.out_root / f"{mode}-s{seed}"
            t0 = time.perf_counter()
            result = train(cfg, out)
            print(f"{mode} seed {seed}: {result.iterations} iterations "
                  f"in {time.perf_counter() - t0:.0f} s -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
