"""Command-line figure rendering.

One subcommand per figure kind; every subcommand takes --out-dir and
writes <kind>.png inside it. Schema problems print the column diff
and exit 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import PlotSpec, render
from .schema import SchemaError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaxnet-plots",
        description="render study figures from CSV artifacts")
    subs = parser.add_subparsers(dest="kind", required=True)

    p = subs.add_parser("channel-surface",
                        help="error rate over (distance, duration)")
    p.add_argument("--table", type=Path, required=True,
                   help="channel_table.csv")
    _common(p)

    p = subs.add_parser("learning-curves", help="reward per iteration")
    p.add_argument("--train", type=Path, nargs="+", required=True,
                   help="one or more train.csv files")
    p.add_argument("--labels", nargs="*", default=[])
    p.add_argument("--window", type=int, default=100)
    _common(p)

    p = subs.add_parser("trajectories",
                        help="agent and target paths for one episode")
    p.add_argument("--metrics", type=Path, required=True)
    p.add_argument("--episode", type=int, default=None)
    p.add_argument("--target-center", type=float, nargs=2,
                   default=[1875.0, 1875.0], metavar=("X", "Y"))
    p.add_argument("--target-radius", type=float, default=1200.0)
    _common(p)

    p = subs.add_parser("latency-error",
                        help="per-slot latency and error rate")
    p.add_argument("--metrics", type=Path, required=True)
    p.add_argument("--episode", type=int, default=None)
    p.add_argument("--latency-line", type=float, default=3.9e-5,
                   help="latency requirement in seconds")
    p.add_argument("--error-line", type=float, default=1e-7)
    _common(p)

    p = subs.add_parser("attention-heatmaps",
                        help="mean attention adjacency, one panel per run")
    p.add_argument("--metrics", type=Path, nargs="+", required=True)
    p.add_argument("--labels", nargs="*", default=[])
    p.add_argument("--episode", type=int, default=None)
    _common(p)

    return parser


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out-dir", type=Path, required=True)


def _spec(args: argparse.Namespace) -> PlotSpec:
    out = args.out_dir / f"{args.kind}.png"
    if args.kind == "channel-surface":
        return PlotSpec(kind=args.kind, inputs=(args.table,), out_path=out)
    if args.kind == "learning-curves":
        return PlotSpec(kind=args.kind, inputs=tuple(args.train),
                        out_path=out, labels=tuple(args.labels),
                        ma_window=args.window)
    if args.kind == "trajectories":
        return PlotSpec(kind=args.kind, inputs=(args.metrics,),
                        out_path=out, episode=args.episode,
                        target_center=tuple(args.target_center),
                        target_radius=args.target_radius)
    if args.kind == "latency-error":
        return PlotSpec(kind=args.kind, inputs=(args.metrics,),
                        out_path=out, episode=args.episode,
                        latency_line_s=args.latency_line,
                        error_line=args.error_line)
    return PlotSpec(kind=args.kind, inputs=tuple(args.metrics),
                    out_path=out, labels=tuple(args.labels),
                    episode=args.episode)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = render(_spec(args))
    except SchemaError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
