"""Versioned JSON checkpoints.

A checkpoint carries the actor parameters (enough for decentralized
execution), optionally the mixer parameters (training-side only), the
policy architecture fields needed to rebuild the nets, and the hash of
the full run configuration so evaluation can refuse a checkpoint that
was trained under different settings.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .policy import PolicyConfig

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint",
           "FORMAT_VERSION"]

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, *, config, iteration: int, actors: dict,
                    mixer: dict | None = None, note: str = "") -> Path:
    """Write atomically (tmp file + rename) and return the final path."""
    payload = {
        "format_version": FORMAT_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.train.seed,
        "iteration": int(iteration),
        "policy": dataclasses.asdict(config.policy),
        "actors": actors,
        "mixer": mixer,
        "note": note,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload), encoding="utf-8")
    tmp.replace(path)
    return path


def load_checkpoint(path, *, config=None, need_mixer: bool = False) -> dict:
    """Read and validate; verify the config hash when one is supplied.

    Returns the payload with `policy` already rebuilt as a
    PolicyConfig. Execution-side callers leave need_mixer False and
    never touch the mixer entry.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {version!r} unsupported "
            f"(expected {FORMAT_VERSION})")
    for key in ("config_hash", "iteration", "policy", "actors"):
        if key not in payload:
            raise CheckpointError(f"checkpoint missing field {key!r}")
    if config is not None and payload["config_hash"] != config.config_hash():
        raise CheckpointError(
            "checkpoint was trained under a different configuration "
            f"(hash {payload['config_hash'][:12]}... vs "
            f"{config.config_hash()[:12]}...)")
    if need_mixer and not payload.get("mixer"):
        raise CheckpointError("checkpoint holds no mixer parameters")
    try:
        payload["policy"] = PolicyConfig(**payload["policy"])
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"bad policy fields: {exc}") from exc
    return payload
