"""Run configuration: one flat key/value file drives every component.

The text format is deliberately tiny: one `section.field = value` pair
per line, `#` comments, blank lines ignored. Every field of every
section has a default, so an empty file is a valid full configuration.
The canonical serialization (sections and fields in declaration order,
floats via repr for exact round-trip) is also what gets hashed, and
the hash is stamped into checkpoints so evaluation can refuse
mismatched configs.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields, replace

from .channel import ChannelParams, UrllcRequirement
from .env import ConfigError, EnvConfig
from .policy import PolicyConfig

__all__ = ["TrainConfig", "RunConfig", "ConfigError", "format_float"]


def format_float(x: float) -> str:
    """17 significant digits: parses back to the identical float."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    batch_size: int = 64
    lr_gaxnet: float = 8e-4      # full model learning rate
    lr_qmix: float = 1e-4        # baseline-mode learning rate
    gamma: float = 0.99
    epsilon_floor: float = 0.3
    anneal_steps: int = 1000
    target_update_period: int = 200
    replay_capacity: int = 5000
    checkpoint_period: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not (0.0 <= self.epsilon_floor <= 1.0):
            raise ConfigError("epsilon_floor must lie in [0, 1]")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise ConfigError("need 1 <= batch_size <= replay_capacity")
        if min(self.iterations, self.anneal_steps,
               self.target_update_period, self.checkpoint_period) < 1:
            raise ConfigError("iteration counts and periods must be positive")


_SECTIONS = (
    ("channel", ChannelParams),
    ("requirement", UrllcRequirement),
    ("env", EnvConfig),
    ("policy", PolicyConfig),
    ("train", TrainConfig),
)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    return repr(value) if isinstance(value, float) else str(value)


def _annotation_name(annotation) -> str:
    # dataclass field types arrive as strings under deferred annotation
    # evaluation and as type objects otherwise
    if isinstance(annotation, str):
        return annotation
    return getattr(annotation, "__name__", None) or str(annotation)


def _parse_value(text: str, annotation: str, key: str):
    text = text.strip()
    if annotation == "bool":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if text.lower() == "none":
        if "None" not in annotation:
            raise ConfigError(f"{key}: none is not allowed here")
        return None
    try:
        if annotation == "int":
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """All knobs for a training or evaluation run, one object."""

    channel: ChannelParams = ChannelParams()
    requirement: UrllcRequirement = UrllcRequirement()
    env: EnvConfig = EnvConfig()
    policy: PolicyConfig = PolicyConfig()
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.env.n_agents != self.policy.n_agents:
            raise ConfigError(
                f"env.n_agents={self.env.n_agents} disagrees with "
                f"policy.n_agents={self.policy.n_agents}")
        expect_obs = 10 + 4 * (self.env.n_agents - 1)
        if self.policy.obs_len != expect_obs:
            raise ConfigError(
                f"policy.obs_len must be {expect_obs} for "
                f"{self.env.n_agents} agents, got {self.policy.obs_len}")
        if self.policy.row_len != 9:
            raise ConfigError("policy.row_len must be 9")

    @property
    def state_len(self) -> int:
        obs_block = self.env.n_agents * self.policy.obs_len
        return 2 * (obs_block + 2)

    @property
    def learning_rate(self) -> float:
        return (self.train.lr_qmix if self.policy.baseline
                else self.train.lr_gaxnet)

    def with_mode(self, baseline: bool = False, no_exchange: bool = False,
                  exchange_raw: bool = False) -> "RunConfig":
        """Apply the CLI mode flags on top of this configuration."""
        pol = self.policy
        if baseline:
            pol = replace(pol, baseline=True)
        if no_exchange:
            pol = replace(pol, exchange=False)
        if exchange_raw:
            pol = replace(pol, exchange_raw=True)
        return replace(self, policy=pol)

    def to_text(self) -> str:
        lines = []
        for section, _ in _SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                lines.append(f"{section}.{f.name} = "
                             f"{_format_value(getattr(obj, f.name))}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        field_types = {
            f"{section}.{f.name}": (section, f.name, _annotation_name(f.type))
            for section, klass in _SECTIONS
            for f in fields(klass)
        }
        overrides: dict[str, dict] = {s: {} for s, _ in _SECTIONS}
        seen: set[str] = set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in field_types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in seen:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            seen.add(key)
            section, name, annotation = field_types[key]
            overrides[section][name] = _parse_value(value, annotation, key)
        parts = {}
        for section, klass in _SECTIONS:
            try:
                parts[section] = klass(**overrides[section])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {exc}") from exc
        return cls(**parts)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def manifest(self) -> dict:
        """JSON-friendly nested dump for run_manifest.json."""
        return {
            section: dataclasses.asdict(getattr(self, section))
            for section, _ in _SECTIONS
        }
