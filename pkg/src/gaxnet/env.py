"""Grid-world simulator: UAV agents shadowing a moving ground user.

A square plane holds N patrol agents and one ground user. Each slot
every agent takes one of 8 compass moves, the user advances along a
bounded random walk about the grid center, and all agents share one
scalar reward: full credit for any agent within the service radius,
a small credit for closing distance, a small penalty otherwise, and a
collision penalty for every ordered pair of agents closer than the
separation limit.

Geometry is kept in meters internally. Everything the simulator emits
(observations, global state) is normalized first: coordinates divide by
the side length, distances by the diagonal, so network inputs sit in
[-1, 1] regardless of grid scale.

Conventions worth pinning down:
  - relative positions point away from the observer: the entry for
    neighbor m in agent n's observation is pos[m] - pos[n]
  - in-range uses <= on the service radius; collision uses strict < on
    the separation limit (so the reset placement, which guarantees
    pairwise distance >= the limit, never starts collided)
  - history depth is exactly two slots; at reset the previous slot is
    bootstrapped to equal the current one
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "EnvConfig",
    "Observation",
    "StepResult",
    "TrackingEnv",
    "ConfigError",
    "EpisodeOver",
    "ACTION_VECTORS",
    "ACTION_NAMES",
    "TARGET_DISC_RADIUS",
]


class ConfigError(ValueError):
    """Configuration cannot produce a valid world."""


class EpisodeOver(RuntimeError):
    """step() called after the episode already finished."""


# The user's random walk is reflected back once it would leave this
# radius around the grid center, keeping it "around the server".
TARGET_DISC_RADIUS = 1200.0

# Heading jitter per slot, +/- 30 degrees.
_HEADING_JITTER = math.pi / 6.0

_D = math.sqrt(0.5)
ACTION_NAMES = ("E", "W", "N", "S", "NE", "NW", "SE", "SW")
ACTION_VECTORS = np.array(
    [
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [_D, _D],
        [-_D, _D],
        [_D, -_D],
        [-_D, -_D],
    ]
)

N_ACTIONS = len(ACTION_VECTORS)

OWN_BLOCK_LEN = 10
OTHER_BLOCK_LEN = 4
OTHER_ROW_LEN = 9


@dataclass(frozen=True)
class EnvConfig:
    grid_side: float = 3750.0
    n_agents: int = 4
    uav_speed: float = 12.5          # m/s (45 km/h)
    target_speed: float = 10.0       # m/s (36 km/h)
    urllc_range: float = 938.0       # service radius d^c, m
    collision_dist: float = 563.0    # separation limit, m
    slot_duration: float = 60.0      # s
    steps_per_episode: int = 20
    observe_radius: float | None = None   # None -> grid diagonal (full view)
    rng_seed: int = 0

    def __post_init__(self):
        if self.observe_radius is None:
            object.__setattr__(
                self, "observe_radius", math.hypot(self.grid_side, self.grid_side)
            )
        if not (0.0 < self.collision_dist < self.urllc_range < self.grid_side):
            raise ConfigError(
                "need 0 < collision_dist < urllc_range < grid_side, got "
                f"{self.collision_dist}, {self.urllc_range}, {self.grid_side}"
            )
        if self.uav_speed <= 0.0 or self.target_speed <= 0.0:
            raise ConfigError("speeds must be positive")
        if self.slot_duration <= 0.0:
            raise ConfigError("slot_duration must be positive")
        if self.steps_per_episode < 1:
            raise ConfigError("steps_per_episode must be at least 1")
        if self.n_agents < 2:
            raise ConfigError("need at least two agents")
        if self.observe_radius <= 0.0:
            raise ConfigError("observe_radius must be positive")

    @property
    def uav_step(self) -> float:
        return self.uav_speed * self.slot_duration

    @property
    def target_step(self) -> float:
        return self.target_speed * self.slot_duration

    @property
    def diagonal(self) -> float:
        return math.hypot(self.grid_side, self.grid_side)

    @property
    def obs_len(self) -> int:
        return OWN_BLOCK_LEN + OTHER_BLOCK_LEN * (self.n_agents - 1)

    @property
    def state_len(self) -> int:
        return 2 * (self.n_agents * self.obs_len + 2)


@dataclass
class Observation:
    """One agent's local view for the current and previous slot.

    own_block (10): current then previous [own position (2), vector to
    user (2), distance to user (1)]. other_blocks ((N-1, 4)): current
    slot only, per neighbor in ascending agent index: [vector to
    neighbor (2), distance (1), visibility flag (1)]; the vector and
    distance are zeroed when the flag is 0.
    """

    agent_id: int
    own_block: np.ndarray
    other_blocks: np.ndarray
    neighbor_ids: tuple[int, ...]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.own_block, self.other_blocks.reshape(-1)])

    def other_rows(self) -> np.ndarray:
        """Per-neighbor 9-vectors for the neighbor-feature encoder.

        Row m: [own position (2), vector to user (2), vector to neighbor
        (2), distance to user (1), distance to neighbor (1), visibility
        flag (1)], all current slot.
        """
        k = len(self.neighbor_ids)
        rows = np.empty((k, OTHER_ROW_LEN))
        rows[:, 0:2] = self.own_block[0:2]
        rows[:, 2:4] = self.own_block[2:4]
        rows[:, 4:6] = self.other_blocks[:, 0:2]
        rows[:, 6] = self.own_block[4]
        rows[:, 7] = self.other_blocks[:, 2]
        rows[:, 8] = self.other_blocks[:, 3]
        return rows


@dataclass
class StepResult:
    observations: list[Observation]
    state: np.ndarray
    reward: float
    done: bool
    info: dict


class TrackingEnv:
    """Single-threaded simulator instance; all randomness is seeded."""

    def __init__(self, config: EnvConfig):
        self.cfg = config
        self._rng: np.random.Generator | None = None
        self._pos: np.ndarray | None = None
        self._prev_pos: np.ndarray | None = None
        self._target: np.ndarray | None = None
        self._prev_target: np.ndarray | None = None
        self._heading = 0.0
        self._slot = 0
        self._done = True
        self._prev_obs_vectors: np.ndarray | None = None
        self._prev_target_norm: np.ndarray | None = None

    # -- lifecycle ----------------------------------------------------

    def reset(self, seed: int | None = None) -> tuple[list[Observation], np.ndarray]:
        cfg = self.cfg
        self._rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
        self._pos = self._place_agents()
        center = np.array([cfg.grid_side / 2.0, cfg.grid_side / 2.0])
        angle = self._rng.uniform(0.0, 2.0 * math.pi)
        radius = 0.5 * TARGET_DISC_RADIUS * math.sqrt(self._rng.uniform())
        self._target = center + radius * np.array([math.cos(angle), math.sin(angle)])
        self._heading = self._rng.uniform(0.0, 2.0 * math.pi)
        self._prev_pos = self._pos.copy()
        self._prev_target = self._target.copy()
        self._slot = 0
        self._done = False

        observations = [self._build_observation(n) for n in range(cfg.n_agents)]
        obs_vectors = np.stack([o.vector() for o in observations])
        target_norm = self._target / cfg.grid_side
        # history bootstrap: previous slot equals the current one
        self._prev_obs_vectors = obs_vectors.copy()
        self._prev_target_norm = target_norm.copy()
        state = self._build_state(obs_vectors, target_norm)
        return observations, state

    def _place_agents(self) -> np.ndarray:
        cfg = self.cfg
        for _ in range(1000):
            pos = self._rng.uniform(0.0, cfg.grid_side, size=(cfg.n_agents, 2))
            deltas = pos[:, None, :] - pos[None, :, :]
            dist = np.hypot(deltas[..., 0], deltas[..., 1])
            np.fill_diagonal(dist, np.inf)
            if dist.min() >= cfg.collision_dist:
                return pos
        raise ConfigError(
            "could not place agents with the required separation; "
            "grid too small for this many agents"
        )

    # -- dynamics -----------------------------------------------------

    def step(self, joint_action: Sequence[int]) -> StepResult:
        cfg = self.cfg
        if self._done or self._pos is None:
            raise EpisodeOver("episode is over; call reset() first")
        actions = list(joint_action)
        if len(actions) != cfg.n_agents:
            raise ValueError(f"need {cfg.n_agents} actions, got {len(actions)}")
        if any(not (0 <= a < N_ACTIONS) for a in actions):
            raise ValueError(f"action indices must be in [0, {N_ACTIONS})")

        self._prev_pos = self._pos.copy()
        self._prev_target = self._target.copy()
        moved = self._pos + ACTION_VECTORS[actions] * cfg.uav_step
        self._pos = np.clip(moved, 0.0, cfg.grid_side)
        self._target = self._advance_target()
        self._slot += 1
        self._done = self._slot == cfg.steps_per_episode

        dist_now = np.hypot(*(self._pos - self._target).T)
        dist_prev = np.hypot(*(self._prev_pos - self._prev_target).T)
        in_range = dist_now <= cfg.urllc_range
        approaching = dist_now < dist_prev
        track_terms = np.where(in_range, 1.0, np.where(approaching, 0.05, -0.01))

        deltas = self._pos[:, None, :] - self._pos[None, :, :]
        pair_dist = np.hypot(deltas[..., 0], deltas[..., 1])
        np.fill_diagonal(pair_dist, np.inf)
        collided = pair_dist < cfg.collision_dist
        collisions = [[int(n), int(m)] for n, m in zip(*np.nonzero(collided))]
        collision_term = -0.5 * len(collisions)
        # accumulate in canonical term order (agents, then ordered
        # pairs) so a brute-force recomputation reproduces the float
        # bit for bit
        reward = 0.0
        for term in track_terms:
            reward += float(term)
        for _ in collisions:
            reward += -0.5

        observations = [self._build_observation(n) for n in range(cfg.n_agents)]
        obs_vectors = np.stack([o.vector() for o in observations])
        target_norm = self._target / cfg.grid_side
        state = self._build_state(obs_vectors, target_norm)
        self._prev_obs_vectors = obs_vectors.copy()
        self._prev_target_norm = target_norm.copy()

        info = {
            "slot": self._slot,
            "actions": [int(a) for a in actions],
            "agent_pos": self._pos.tolist(),
            "target_pos": self._target.tolist(),
            "target_dist": dist_now.tolist(),
            "target_dist_prev": dist_prev.tolist(),
            "in_range": [bool(x) for x in in_range],
            "approaching": [bool(x) for x in approaching],
            "collisions": collisions,
            "track_terms": track_terms.tolist(),
            "collision_term": collision_term,
            "reward": reward,
        }
        return StepResult(observations, state, reward, self._done, info)

    def _advance_target(self) -> np.ndarray:
        cfg = self.cfg
        center = np.array([cfg.grid_side / 2.0, cfg.grid_side / 2.0])
        self._heading += self._rng.uniform(-_HEADING_JITTER, _HEADING_JITTER)
        step = cfg.target_step
        prop = self._target + step * np.array(
            [math.cos(self._heading), math.sin(self._heading)]
        )
        if math.hypot(*(prop - center)) > TARGET_DISC_RADIUS:
            # bounce: turn straight toward the center for this slot; a
            # full step inward from inside the disc always stays inside
            self._heading = math.atan2(*(center - self._target)[::-1])
            prop = self._target + step * np.array(
                [math.cos(self._heading), math.sin(self._heading)]
            )
        return prop

    # -- observation assembly ------------------------------------------

    def _build_observation(self, n: int) -> Observation:
        cfg = self.cfg
        side = cfg.grid_side
        diag = cfg.diagonal

        def own_half(pos, target):
            rel = target - pos[n]
            return np.concatenate(
                [pos[n] / side, rel / side, [np.hypot(*rel) / diag]]
            )

        own = np.concatenate(
            [
                own_half(self._pos, self._target),
                own_half(self._prev_pos, self._prev_target),
            ]
        )

        neighbor_ids = tuple(m for m in range(cfg.n_agents) if m != n)
        blocks = np.zeros((len(neighbor_ids), OTHER_BLOCK_LEN))
        for row, m in enumerate(neighbor_ids):
            rel = self._pos[m] - self._pos[n]
            d = math.hypot(*rel)
            if d <= cfg.observe_radius:
                blocks[row, 0:2] = rel / side
                blocks[row, 2] = d / diag
                blocks[row, 3] = 1.0
            # unobservable neighbors stay exactly zero
        return Observation(n, own, blocks, neighbor_ids)

    def _build_state(self, obs_vectors: np.ndarray, target_norm: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [
                obs_vectors.reshape(-1),
                target_norm,
                self._prev_obs_vectors.reshape(-1),
                self._prev_target_norm,
            ]
        )
