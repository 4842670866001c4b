"""Pinned CSV schemas and a strict loader.

The study CLI writes four table kinds; their headers are frozen here
and checked verbatim. A mismatch names exactly which columns are
missing or unexpected rather than failing later on a KeyError, since
these files typically come from another machine or an older run.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = [
    "CHANNEL_COLUMNS",
    "EXCHANGE_COLUMNS",
    "METRICS_COLUMNS",
    "TRAIN_COLUMNS",
    "SchemaError",
    "load_table",
]

N_AGENTS = 4

TRAIN_COLUMNS = ("iteration", "epsilon", "loss", "episode_reward",
                 "collision_count", "in_range_count")

CHANNEL_COLUMNS = ("distance_m", "duration_s", "snr_db", "error_rate")

EXCHANGE_COLUMNS = ("episode", "slot", "sender", "receiver", "value")


def _metrics_columns() -> tuple[str, ...]:
    cols = ["episode", "slot"]
    for n in range(N_AGENTS):
        cols += [f"agent{n}_x", f"agent{n}_y"]
    cols += ["target_x", "target_y"]
    cols += [f"dist_{n}" for n in range(N_AGENTS)]
    cols += [f"collision_{n}" for n in range(N_AGENTS)]
    cols += ["serving_agent", "serving_dist_m", "serving_snr_db",
             "error_rate", "min_latency_s", "meets_requirement", "reward"]
    for n in range(N_AGENTS):
        for m in range(N_AGENTS):
            cols.append(f"attn_{n}_{m}")
    return tuple(cols)


METRICS_COLUMNS = _metrics_columns()


class SchemaError(ValueError):
    """Header of a CSV does not match its pinned schema."""

    def __init__(self, path, missing, unexpected, note: str = ""):
        self.path = Path(path)
        self.missing = tuple(missing)
        self.unexpected = tuple(unexpected)
        parts = [f"{self.path}: header does not match the pinned schema"]
        if self.missing:
            parts.append(f"missing columns: {', '.join(self.missing)}")
        if self.unexpected:
            parts.append(f"unexpected columns: {', '.join(self.unexpected)}")
        if note:
            parts.append(note)
        super().__init__("; ".join(parts))


def _parse_cell(cell: str) -> float:
    # training rows leave the loss blank until the replay fills up
    return float(cell) if cell else float("nan")


def load_table(path, expected: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read a CSV into per-column float arrays, verifying the header."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SchemaError(path, expected, (), note="file is empty")
    header = lines[0].split(",")
    if header != list(expected):
        missing = [c for c in expected if c not in header]
        unexpected = [c for c in header if c not in expected]
        note = "" if (missing or unexpected) else "column order differs"
        raise SchemaError(path, missing, unexpected, note)
    if len(lines) < 2:
        raise ValueError(f"{path}: no data rows")
    rows = np.array([[_parse_cell(c) for c in line.split(",")]
                     for line in lines[1:]])
    if rows.shape[1] != len(expected):
        raise ValueError(f"{path}: ragged rows")
    return {name: rows[:, i] for i, name in enumerate(expected)}
