"""Greedy evaluation of trained actors, plus the channel study tables.

Everything here is execution-side: actors are rebuilt from a
checkpoint's parameters alone and run fully decentralized (each agent
sees its own observation, its own weights, and last slot's messages).
Nothing in this module imports the mixer or the trainer.

Outputs are plain CSV/JSON with all floats at 17 significant digits so
every figure-facing number round-trips exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import channel, nn
from .checkpoint import load_checkpoint
from .config import RunConfig, format_float
from .env import TrackingEnv
from .policy import Actor, ActorHidden, ActorTeam, neighbor_ids, route_messages

__all__ = [
    "EvalResult",
    "SlotRecord",
    "run_episode",
    "run_eval",
    "symmetry_mse",
    "channel_table",
    "write_channel_table",
    "METRICS_COLUMNS",
    "EXCHANGE_COLUMNS",
]


def _metrics_columns(n_agents: int) -> tuple[str, ...]:
    cols = ["episode", "slot"]
    for n in range(n_agents):
        cols += [f"agent{n}_x", f"agent{n}_y"]
    cols += ["target_x", "target_y"]
    cols += [f"dist_{n}" for n in range(n_agents)]
    cols += [f"collision_{n}" for n in range(n_agents)]
    cols += ["serving_agent", "serving_dist_m", "serving_snr_db",
             "error_rate", "min_latency_s", "meets_requirement", "reward"]
    for n in range(n_agents):
        for m in range(n_agents):
            cols.append(f"attn_{n}_{m}")
    return tuple(cols)


METRICS_COLUMNS = _metrics_columns(4)
EXCHANGE_COLUMNS = ("episode", "slot", "sender", "receiver", "value")


@dataclass
class SlotRecord:
    """Everything measured in one slot of one evaluation episode."""

    episode: int
    slot: int
    agent_pos: np.ndarray        # (N, 2) meters
    target_pos: np.ndarray       # (2,)
    dists: np.ndarray            # (N,) agent-to-target, meters
    collision_flags: np.ndarray  # (N,) agent involved in any collision
    collision_pairs: int         # ordered pairs below the separation limit
    serving_agent: int
    serving_dist: float
    serving_snr_db: float
    error_rate: float            # at the fixed transmission duration
    min_latency: float           # seconds; inf when unreachable
    meets_requirement: bool
    reward: float
    attention: np.ndarray        # (N, N), row attends to column, diag 0
    exchange: np.ndarray         # (N, N), row sent to column, diag 0


def _expand_matrix(per_neighbor: np.ndarray, n_agents: int) -> np.ndarray:
    """(N, N-1) neighbor-indexed values -> (N, N) with zero diagonal."""
    out = np.zeros((n_agents, n_agents))
    for n in range(n_agents):
        for j, m in enumerate(neighbor_ids(n_agents, n)):
            out[n, m] = per_neighbor[n, j]
    return out


def run_episode(config: RunConfig, actors: list[Actor], episode_index: int,
                rng: np.random.Generator) -> list[SlotRecord]:
    """One greedy decentralized rollout measured slot by slot."""
    env = TrackingEnv(config.env)
    n_agents = config.env.n_agents
    k = n_agents - 1
    cp = config.channel
    req_eps = config.requirement.target_error
    req_lat = config.requirement.target_latency
    obs_list, _ = env.reset(rng)
    hiddens = [a.init_hidden() for a in actors]
    inbox = np.zeros((n_agents, k))
    records: list[SlotRecord] = []
    for slot in range(config.env.steps_per_episode):
        actions = []
        weights = np.zeros((n_agents, k))
        sends = np.zeros((n_agents, k))
        for n, actor in enumerate(actors):
            o = obs_list[n]
            with nn.no_grad():
                rows = (None if actor.cfg.baseline
                        else nn.tensor(o.other_rows()[None]))
                box = (None if actor.cfg.baseline
                       else nn.tensor(inbox[n][None]))
                e = (None if actor.cfg.baseline
                     else o.other_blocks[None, :, 3])
                q, w, out, head, pair = actor.step(
                    nn.tensor(o.vector()[None]), rows, box,
                    hiddens[n].head, hiddens[n].pair, e_flags=e)
            actions.append(int(np.argmax(q.data[0])))
            hiddens[n] = ActorHidden(
                head=head, pair=pair if pair is not None else hiddens[n].pair)
            if actor.cfg.baseline:
                continue
            weights[n] = w.data[0]
            sends[n] = (w.data[0] if actor.cfg.exchange_raw
                        else out.data[0])
        result = env.step(actions)
        info = result.info

        dists = np.asarray(info["target_dist"])
        serving = int(np.argmin(dists))
        serving_dist = float(dists[serving])
        s = channel.snr(serving_dist, cp.altitude, cp)
        err = channel.error_rate(s, cp.t_max, cp)
        latency = channel.min_latency(s, req_eps, cp)
        flags = np.zeros(n_agents, dtype=bool)
        for a, b in info["collisions"]:
            flags[a] = True
            flags[b] = True
        records.append(SlotRecord(
            episode=episode_index,
            slot=slot,
            agent_pos=np.asarray(info["agent_pos"]),
            target_pos=np.asarray(info["target_pos"]),
            dists=dists,
            collision_flags=flags,
            collision_pairs=len(info["collisions"]),
            serving_agent=serving,
            serving_dist=serving_dist,
            serving_snr_db=channel.linear_to_db(s),
            error_rate=err,
            min_latency=latency,
            meets_requirement=bool(err <= req_eps and latency <= req_lat),
            reward=float(info["reward"]),
            attention=_expand_matrix(weights, n_agents),
            exchange=_expand_matrix(sends, n_agents),
        ))

        if actors[0].cfg.exchange and not actors[0].cfg.baseline:
            inbox = route_messages(sends, np.ones_like(sends))
        else:
            inbox = np.zeros_like(inbox)
        obs_list = result.observations
    return records


def symmetry_mse(matrices: np.ndarray) -> tuple[float, float]:
    """Lag-one reciprocity of directed per-slot matrices.

    Input: (T, N, N), entry [t, n, m] = weight agent n assigns toward
    m at slot t. Compares each slot's matrix against the transpose of
    the previous slot's (the reverse direction, one slot earlier, which
    is the horizon a received message can reflect) over all ordered
    off-diagonal pairs. Returns (mean squared difference, max absolute
    difference).
    """
    mats = np.asarray(matrices, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError(f"need (T, N, N) matrices, got {mats.shape}")
    if mats.shape[0] < 2:
        raise ValueError("need at least two slots")
    n = mats.shape[1]
    diffs = mats[1:] - mats[:-1].transpose(0, 2, 1)
    off = ~np.eye(n, dtype=bool)
    picked = diffs[:, off]
    return float(np.mean(picked ** 2)), float(np.max(np.abs(picked)))


def _record_row(rec: SlotRecord) -> str:
    parts = [str(rec.episode), str(rec.slot)]
    for pos in rec.agent_pos:
        parts += [format_float(pos[0]), format_float(pos[1])]
    parts += [format_float(rec.target_pos[0]), format_float(rec.target_pos[1])]
    parts += [format_float(d) for d in rec.dists]
    parts += [str(int(f)) for f in rec.collision_flags]
    parts += [str(rec.serving_agent), format_float(rec.serving_dist),
              format_float(rec.serving_snr_db), format_float(rec.error_rate),
              format_float(rec.min_latency),
              str(int(rec.meets_requirement)), format_float(rec.reward)]
    parts += [format_float(v) for v in rec.attention.reshape(-1)]
    return ",".join(parts)


@dataclass
class EvalResult:
    out_dir: Path
    metrics_path: Path
    exchange_path: Path
    summary_path: Path
    summary: dict


def run_eval(checkpoint_path, config: RunConfig, episodes: int, seed: int,
             out_dir) -> EvalResult:
    """Greedy rollouts from a checkpoint; writes metrics.csv,
    exchange.csv, and eval_summary.json under out_dir.

    The checkpoint's stored config hash must match `config`; only the
    actor parameters are read from it.
    """
    payload = load_checkpoint(checkpoint_path, config=config)
    team = ActorTeam(payload["policy"], np.random.default_rng(0))
    team.load_state_dict(payload["actors"])
    actors = [team.actor(n) for n in range(config.env.n_agents)]
    rng = np.random.default_rng(seed)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    exchange_path = out / "exchange.csv"
    summary_path = out / "eval_summary.json"

    all_records: list[SlotRecord] = []
    mses, max_diffs = [], []
    with open(metrics_path, "w", encoding="utf-8") as mfh, \
            open(exchange_path, "w", encoding="utf-8") as xfh:
        mfh.write(",".join(_metrics_columns(config.env.n_agents)) + "\n")
        xfh.write(",".join(EXCHANGE_COLUMNS) + "\n")
        for ep in range(episodes):
            records = run_episode(config, actors, ep, rng)
            all_records.extend(records)
            for rec in records:
                mfh.write(_record_row(rec) + "\n")
                for n in range(config.env.n_agents):
                    for m in range(config.env.n_agents):
                        if n == m:
                            continue
                        xfh.write(f"{rec.episode},{rec.slot},{n},{m},"
                                  f"{format_float(rec.exchange[n, m])}\n")
            # reciprocity is scored on the attention matrices: the
            # sent values' head sees no gradient in the silenced
            # ablation, so only attention is a trained quantity in
            # every mode
            mse, diff = symmetry_mse(
                np.stack([r.attention for r in records]))
            mses.append(mse)
            max_diffs.append(diff)

    latencies = [r.min_latency for r in all_records]
    finite = [x for x in latencies if math.isfinite(x)]
    summary = {
        "episodes": episodes,
        "slots_per_episode": config.env.steps_per_episode,
        "seed": seed,
        "checkpoint_iteration": payload["iteration"],
        "config_hash": config.config_hash(),
        "collision_pairs_total": sum(r.collision_pairs for r in all_records),
        "collision_slots": sum(bool(r.collision_flags.any())
                               for r in all_records),
        "mean_reward_per_episode": (sum(r.reward for r in all_records)
                                    / episodes),
        "fraction_meeting_requirement": (
            sum(r.meets_requirement for r in all_records)
            / len(all_records)),
        "mean_latency_s": (sum(finite) / len(finite)) if finite else None,
        "max_latency_s": max(finite) if finite else None,
        "slots_latency_unbounded": len(latencies) - len(finite),
        "symmetry_mse_per_episode": mses,
        "symmetry_mse_mean": sum(mses) / len(mses),
        "symmetry_max_diff": max(max_diffs),
    }
    summary_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return EvalResult(out_dir=out, metrics_path=metrics_path,
                      exchange_path=exchange_path, summary_path=summary_path,
                      summary=summary)


def channel_table(config: RunConfig, distances: np.ndarray,
                  durations: np.ndarray) -> list[tuple[float, float, float, float]]:
    """Error-rate surface over (ground distance, transmission duration).

    Returns rows (d, t, snr_db, error_rate). The configured service
    radius at the fixed per-bit duration is appended as the operating
    point when not already on the grid.
    """
    cp = config.channel
    points = [(float(d), float(t)) for d in distances for t in durations]
    op = (float(config.env.urllc_range), float(cp.t_max))
    if op not in points:
        points.append(op)
    rows = []
    for d, t in points:
        s = channel.snr(d, cp.altitude, cp)
        rows.append((d, t, channel.linear_to_db(s),
                     channel.error_rate(s, t, cp)))
    return rows


def write_channel_table(config: RunConfig, distances, durations,
                        path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = channel_table(config, np.asarray(distances, dtype=float),
                         np.asarray(durations, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("distance_m,duration_s,snr_db,error_rate\n")
        for d, t, snr_db, err in rows:
            fh.write(",".join(format_float(v)
                              for v in (d, t, snr_db, err)) + "\n")
    return path
