"""Centralized training with decentralized-executable actors.

One iteration = collect one full episode with the current nets under
an annealed exploration rate, then take one gradient step on a batch
of whole episodes sampled uniformly from replay. Episodes are stored
and replayed whole because both the utility head and the message cells
are recurrent: replay re-runs the nets over the episode in slot order,
rebuilding hidden states and re-deriving the exchanged messages from
the stored observations under the current parameters.

The temporal-difference target bootstraps through a frozen copy of
the actors and the mixing net, hard-refreshed on a fixed period. The
loss is the squared error between the mixed team value of the chosen
actions and r + gamma * (mixed per-agent maxima at the next slot),
summed over the batch and over slots; terminal slots bootstrap zero.

Run artifacts: train.csv (one row per iteration), trajectory.jsonl
(one line per slot of every collected episode), periodic checkpoints,
and run_manifest.json. A fixed (seed, config) pair reproduces every
logged byte.
"""

from __future__ import annotations

import collections
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .checkpoint import save_checkpoint
from .config import RunConfig, format_float
from .env import TrackingEnv
from .mixer import MixingNetwork, monotonicity_probe
from .policy import ActorTeam

__all__ = [
    "Episode",
    "ReplayBuffer",
    "TrainResult",
    "collect_episode",
    "epsilon_schedule",
    "null_baseline",
    "rows_from_obs",
    "td_loss",
    "td_update",
    "train",
    "update_target",
    "format_float",
]

TRAIN_CSV_COLUMNS = ("iteration", "epsilon", "loss", "episode_reward",
                     "collision_count", "in_range_count")


@dataclass
class Episode:
    """One stored rollout; slot t holds the pre-step data of that slot."""

    obs: np.ndarray        # (T, A, obs_len) observation vectors
    states: np.ndarray     # (T, state_len)
    actions: np.ndarray    # (T, A) int
    rewards: np.ndarray    # (T,)
    dones: np.ndarray      # (T,) bool, True exactly at the final slot

    def __post_init__(self):
        t = self.obs.shape[0]
        if not (self.states.shape[0] == self.actions.shape[0]
                == self.rewards.shape[0] == self.dones.shape[0] == t):
            raise ValueError("episode arrays disagree on slot count")
        if t == 0 or not self.dones[-1] or self.dones[:-1].any():
            raise ValueError("episodes must be whole: done only at the end")


class ReplayBuffer:
    """FIFO buffer of whole episodes with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._episodes: collections.deque[Episode] = collections.deque(
            maxlen=capacity)

    def __len__(self) -> int:
        return len(self._episodes)

    def append(self, episode: Episode) -> None:
        self._episodes.append(episode)

    def sample(self, rng: np.random.Generator, n: int) -> list[Episode]:
        if n > len(self._episodes):
            raise ValueError(
                f"cannot sample {n} episodes from {len(self._episodes)}")
        idx = rng.choice(len(self._episodes), size=n, replace=False)
        return [self._episodes[int(i)] for i in idx]


def epsilon_schedule(iteration: int, floor: float = 0.3,
                     anneal_steps: int = 1000) -> float:
    """Linear from 1.0 down to the floor, then flat."""
    if iteration < 0:
        raise ValueError("iteration must be nonnegative")
    frac = min(iteration, anneal_steps) / anneal_steps
    return 1.0 - (1.0 - floor) * frac


def rows_from_obs(obs: np.ndarray, n_neighbors: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild neighbor-encoder rows and visibility flags from stored
    observation vectors. obs: (..., 10 + 4K) -> rows (..., K, 9),
    flags (..., K)."""
    own = obs[..., :10]
    oth = obs[..., 10:].reshape(obs.shape[:-1] + (n_neighbors, 4))
    rows = np.empty(obs.shape[:-1] + (n_neighbors, 9))
    rows[..., 0:2] = own[..., None, 0:2]
    rows[..., 2:4] = own[..., None, 2:4]
    rows[..., 4:6] = oth[..., 0:2]
    rows[..., 6] = own[..., None, 4]
    rows[..., 7] = oth[..., 2]
    rows[..., 8] = oth[..., 3]
    return rows, oth[..., 3].copy()


def _team_inputs(obs: np.ndarray, baseline: bool, n_neighbors: int):
    if baseline:
        return obs, None, None
    rows, e = rows_from_obs(obs, n_neighbors)
    return obs, rows, e


def collect_episode(env: TrackingEnv, team: ActorTeam, epsilon: float,
                    rng: np.random.Generator
                    ) -> tuple[Episode, list[dict], float]:
    """Roll one episode with per-agent epsilon-greedy choices.

    Exploration draws happen per agent in index order (one uniform,
    then one integer draw only when exploring), so a fixed generator
    state reproduces the episode bit-exactly. Returns the stored
    episode, the per-slot env info records, and the episode reward
    accumulated in slot order.
    """
    cfg = team.cfg
    n_slots = env.cfg.steps_per_episode
    obs_list, state = env.reset(rng)
    team_state = team.init_state(1)
    obs_log = np.empty((n_slots, cfg.n_agents, cfg.obs_len))
    state_log = np.empty((n_slots, state.shape[0]))
    action_log = np.empty((n_slots, cfg.n_agents), dtype=np.intp)
    reward_log = np.empty(n_slots)
    done_log = np.zeros(n_slots, dtype=bool)
    infos: list[dict] = []
    total_reward = 0.0
    for t in range(n_slots):
        obs_vec = np.stack([o.vector() for o in obs_list])
        obs_log[t] = obs_vec
        state_log[t] = state
        stacked, rows, e = _team_inputs(obs_vec[:, None, :], cfg.baseline,
                                        cfg.n_neighbors)
        with nn.no_grad():
            q, _, _, team_state = team.step(stacked, rows, e, team_state)
        actions = []
        for n in range(cfg.n_agents):
            if rng.uniform() < epsilon:
                actions.append(int(rng.integers(cfg.n_actions)))
            else:
                actions.append(int(np.argmax(q.data[n, 0])))
        result = env.step(actions)
        action_log[t] = actions
        reward_log[t] = result.reward
        done_log[t] = result.done
        infos.append(result.info)
        total_reward += result.reward
        obs_list, state = result.observations, result.state
    return (Episode(obs=obs_log, states=state_log, actions=action_log,
                    rewards=reward_log, dones=done_log),
            infos, total_reward)


def td_loss(team: ActorTeam, target_team: ActorTeam,
            mixer: MixingNetwork, target_mixer: MixingNetwork,
            batch: list[Episode], gamma: float) -> nn.Tensor:
    """Squared TD error summed over a batch of whole episodes."""
    cfg = team.cfg
    n_slots = batch[0].obs.shape[0]
    size = len(batch)
    # (T, A, I, obs), (T, I, S), (T, A, I), (T, I)
    obs = np.stack([ep.obs for ep in batch]).transpose(1, 2, 0, 3)
    states = np.stack([ep.states for ep in batch]).transpose(1, 0, 2)
    actions = np.stack([ep.actions for ep in batch]).transpose(1, 2, 0)
    rewards = np.stack([ep.rewards for ep in batch]).T
    dones = np.stack([ep.dones for ep in batch]).T

    online_state = team.init_state(size)
    target_state = target_team.init_state(size)
    q_tot: list[nn.Tensor] = []
    boot = np.empty((n_slots, size))
    for t in range(n_slots):
        stacked, rows, e = _team_inputs(obs[t], cfg.baseline, cfg.n_neighbors)
        q, _, _, online_state = team.step(stacked, rows, e, online_state)
        chosen = nn.gather_actions_stack(q, actions[t])
        q_tot.append(mixer.mix(nn.transpose_01(chosen), states[t]))
        with nn.no_grad():
            tq, _, _, target_state = target_team.step(stacked, rows, e,
                                                      target_state)
            best = tq.data.max(axis=2)
            boot[t] = target_mixer.mix(nn.tensor(best.T), states[t]).data

    loss: nn.Tensor | None = None
    for t in range(n_slots):
        nxt = boot[t + 1] if t + 1 < n_slots else np.zeros(size)
        y = rewards[t] + gamma * np.where(dones[t], 0.0, nxt)
        err = nn.sum_squared_error(q_tot[t], y)
        loss = err if loss is None else nn.add(loss, err)
    return loss


def td_update(team: ActorTeam, target_team: ActorTeam,
              mixer: MixingNetwork, target_mixer: MixingNetwork,
              batch: list[Episode], gamma: float, lr: float) -> float:
    """One squared-TD-error gradient step over a batch of episodes."""
    loss = td_loss(team, target_team, mixer, target_mixer, batch, gamma)
    team.store.zero_grads()
    mixer.store.zero_grads()
    loss.backward()
    team.store.adam_step(lr)
    mixer.store.adam_step(lr)
    return float(loss.data)


def update_target(team: ActorTeam, target_team: ActorTeam,
                  mixer: MixingNetwork, target_mixer: MixingNetwork) -> None:
    target_team.store.copy_from(team.store)
    target_mixer.store.copy_from(mixer.store)


def null_baseline(config: RunConfig, episodes: int, rng: np.random.Generator
                  ) -> dict:
    """Fully random (epsilon = 1) rollouts: the untrained reference.

    Returns mean episode reward plus total collision and in-range
    counts over the requested episodes.
    """
    env = TrackingEnv(config.env)
    total_reward = 0.0
    collisions = 0
    in_range = 0
    for _ in range(episodes):
        env.reset(rng)
        for _ in range(config.env.steps_per_episode):
            acts = [int(rng.integers(config.policy.n_actions))
                    for _ in range(config.env.n_agents)]
            result = env.step(acts)
            total_reward += result.reward
            collisions += len(result.info["collisions"])
            in_range += sum(result.info["in_range"])
    return {
        "episodes": episodes,
        "mean_reward": total_reward / episodes,
        "collision_count": collisions,
        "in_range_count": in_range,
    }


@dataclass
class TrainResult:
    out_dir: Path
    csv_path: Path
    trajectory_path: Path
    checkpoint_path: Path
    manifest_path: Path
    iterations: int
    final_loss: float | None


def train(config: RunConfig, out_dir) -> TrainResult:
    """Full training run; writes all artifacts under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tc = config.train
    rng = np.random.default_rng(tc.seed)
    env = TrackingEnv(config.env)
    team = ActorTeam(config.policy, rng)
    mixer = MixingNetwork(config.policy.n_agents, config.state_len, rng)
    target_team = team.clone()
    target_mixer = mixer.clone()
    replay = ReplayBuffer(tc.replay_capacity)
    lr = config.learning_rate

    manifest_path = out / "run_manifest.json"
    manifest_path.write_text(json.dumps({
        "config": config.manifest(),
        "config_hash": config.config_hash(),
        "seed": tc.seed,
        "learning_rate": lr,
        "mixer_monotonicity_violations": monotonicity_probe(
            mixer, np.random.default_rng(tc.seed), trials=100),
        "actor_parameter_count": team.n_scalars(),
    }, indent=2), encoding="utf-8")
    # resolved config, seed and mode flags included, so later eval calls
    # can point --config here and match the checkpoint hash
    (out / "config.txt").write_text(config.to_text(), encoding="utf-8")

    csv_path = out / "train.csv"
    traj_path = out / "trajectory.jsonl"
    ckpt_path = out / "checkpoint_final.json"
    final_loss: float | None = None

    with open(csv_path, "w", encoding="utf-8") as csv_fh, \
            open(traj_path, "w", encoding="utf-8") as traj_fh:
        csv_fh.write(",".join(TRAIN_CSV_COLUMNS) + "\n")
        for it in range(tc.iterations):
            epsilon = epsilon_schedule(it, tc.epsilon_floor, tc.anneal_steps)
            episode, infos, ep_reward = collect_episode(env, team, epsilon,
                                                        rng)
            replay.append(episode)
            collision_count = sum(len(i["collisions"]) for i in infos)
            in_range_count = sum(sum(i["in_range"]) for i in infos)
            for info in infos:
                traj_fh.write(json.dumps({"iteration": it, **info}) + "\n")

            loss_text = ""
            if len(replay) >= tc.batch_size:
                batch = replay.sample(rng, tc.batch_size)
                try:
                    final_loss = td_update(team, target_team, mixer,
                                           target_mixer, batch, tc.gamma, lr)
                except nn.NumericError:
                    save_checkpoint(out / "checkpoint_diagnostic.json",
                                    config=config, iteration=it,
                                    actors=team.state_dict(),
                                    mixer=mixer.state_dict(),
                                    note="aborted on non-finite loss")
                    raise
                loss_text = format_float(final_loss)

            if (it + 1) % tc.target_update_period == 0:
                update_target(team, target_team, mixer, target_mixer)

            csv_fh.write(",".join([
                str(it),
                format_float(epsilon),
                loss_text,
                format_float(ep_reward),
                str(collision_count),
                str(in_range_count),
            ]) + "\n")

            if (it + 1) % tc.checkpoint_period == 0 and it + 1 != tc.iterations:
                save_checkpoint(out / f"checkpoint_{it + 1:06d}.json",
                                config=config, iteration=it + 1,
                                actors=team.state_dict(),
                                mixer=mixer.state_dict())
    save_checkpoint(ckpt_path, config=config, iteration=tc.iterations,
                    actors=team.state_dict(), mixer=mixer.state_dict())
    return TrainResult(out_dir=out, csv_path=csv_path,
                       trajectory_path=traj_path, checkpoint_path=ckpt_path,
                       manifest_path=manifest_path,
                       iterations=tc.iterations, final_loss=final_loss)
