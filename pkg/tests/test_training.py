import json

import numpy as np
import pytest

from gaxnet import nn
from gaxnet.config import RunConfig, TrainConfig
from gaxnet.env import EnvConfig, TrackingEnv
from gaxnet.mixer import MixingNetwork
from gaxnet.policy import ActorTeam, PolicyConfig
from gaxnet.training import (Episode, ReplayBuffer, collect_episode,
                             epsilon_schedule, format_float, null_baseline,
                             rows_from_obs, td_update, train, update_target)


def tiny_run_config(**train_kw) -> RunConfig:
    defaults = dict(iterations=12, batch_size=4, replay_capacity=50,
                    anneal_steps=10, target_update_period=5,
                    checkpoint_period=1000, seed=0)
    defaults.update(train_kw)
    return RunConfig(train=TrainConfig(**defaults))


def fresh_nets(config, seed=0):
    rng = np.random.default_rng(seed)
    team = ActorTeam(config.policy, rng)
    mixer = MixingNetwork(config.policy.n_agents, config.state_len, rng)
    return team, mixer, team.clone(), mixer.clone()


class TestEpsilonSchedule:
    def test_starts_fully_exploratory(self):
        assert epsilon_schedule(0) == 1.0

    def test_linear_midpoint(self):
        assert epsilon_schedule(500) == pytest.approx(0.65, rel=1e-12)

    def test_reaches_floor_at_anneal_end(self):
        assert epsilon_schedule(1000) == pytest.approx(0.3, rel=1e-12)

    def test_holds_after_anneal(self):
        assert epsilon_schedule(5000) == pytest.approx(0.3, rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            epsilon_schedule(-1)


class TestReplayBuffer:
    def make_episode(self, seed=0, n_slots=3):
        rng = np.random.default_rng(seed)
        dones = np.zeros(n_slots, dtype=bool)
        dones[-1] = True
        return Episode(obs=rng.normal(size=(n_slots, 4, 22)),
                       states=rng.normal(size=(n_slots, 180)),
                       actions=rng.integers(0, 8, size=(n_slots, 4)),
                       rewards=rng.normal(size=n_slots),
                       dones=dones)

    def test_occupancy_grows_until_capacity(self):
        buf = ReplayBuffer(capacity=3)
        for i in range(5):
            buf.append(self.make_episode(seed=i))
            assert len(buf) == min(i + 1, 3)

    def test_fifo_eviction(self):
        buf = ReplayBuffer(capacity=2)
        eps = [self.make_episode(seed=i) for i in range(3)]
        for ep in eps:
            buf.append(ep)
        sampled = buf.sample(np.random.default_rng(0), 2)
        assert all(s is not eps[0] for s in sampled)

    def test_sampling_more_than_stored_raises(self):
        buf = ReplayBuffer(capacity=5)
        buf.append(self.make_episode())
        with pytest.raises(ValueError):
            buf.sample(np.random.default_rng(0), 2)

    def test_episode_must_end_and_only_end_done(self):
        good = self.make_episode()
        bad_dones = good.dones.copy()
        bad_dones[-1] = False
        with pytest.raises(ValueError):
            Episode(obs=good.obs, states=good.states, actions=good.actions,
                    rewards=good.rewards, dones=bad_dones)
        early = good.dones.copy()
        early[0] = True
        with pytest.raises(ValueError):
            Episode(obs=good.obs, states=good.states, actions=good.actions,
                    rewards=good.rewards, dones=early)

    def test_slot_count_mismatch_rejected(self):
        good = self.make_episode()
        with pytest.raises(ValueError):
            Episode(obs=good.obs, states=good.states[:-1],
                    actions=good.actions, rewards=good.rewards,
                    dones=good.dones)


class TestRowReconstruction:
    def test_matches_observation_accessors(self):
        env = TrackingEnv(EnvConfig(observe_radius=1800.0))
        rng = np.random.default_rng(5)
        obs_list, _ = env.reset(rng)
        for _ in range(4):
            res = env.step([int(rng.integers(8)) for _ in range(4)])
            obs_list = res.observations
            vecs = np.stack([o.vector() for o in obs_list])
            rows, e = rows_from_obs(vecs, 3)
            for n, o in enumerate(obs_list):
                np.testing.assert_array_equal(rows[n], o.other_rows())
                np.testing.assert_array_equal(e[n], o.other_blocks[:, 3])

    def test_arbitrary_leading_shape(self):
        rng = np.random.default_rng(6)
        obs = rng.normal(size=(2, 3, 22))
        rows, e = rows_from_obs(obs, 3)
        assert rows.shape == (2, 3, 3, 9)
        assert e.shape == (2, 3, 3)


class TestCollectEpisode:
    def test_episode_has_full_slot_count(self):
        cfg = RunConfig()
        team = ActorTeam(cfg.policy, np.random.default_rng(0))
        env = TrackingEnv(cfg.env)
        ep, infos, reward = collect_episode(env, team, 0.5,
                                            np.random.default_rng(1))
        assert ep.obs.shape == (20, 4, 22)
        assert ep.states.shape == (20, 180)
        assert len(infos) == 20
        assert ep.dones[-1] and not ep.dones[:-1].any()

    def test_greedy_collection_is_deterministic(self):
        cfg = RunConfig()
        team = ActorTeam(cfg.policy, np.random.default_rng(0))
        env = TrackingEnv(cfg.env)
        ep1, _, r1 = collect_episode(env, team, 0.0, np.random.default_rng(7))
        ep2, _, r2 = collect_episode(env, team, 0.0, np.random.default_rng(7))
        np.testing.assert_array_equal(ep1.actions, ep2.actions)
        np.testing.assert_array_equal(ep1.obs, ep2.obs)
        assert r1 == r2

    def test_exploring_collection_is_seed_deterministic(self):
        cfg = RunConfig()
        team = ActorTeam(cfg.policy, np.random.default_rng(0))
        env = TrackingEnv(cfg.env)
        ep1, _, _ = collect_episode(env, team, 0.9, np.random.default_rng(8))
        ep2, _, _ = collect_episode(env, team, 0.9, np.random.default_rng(8))
        np.testing.assert_array_equal(ep1.actions, ep2.actions)

    def test_reward_accumulates_in_slot_order(self):
        cfg = RunConfig()
        team = ActorTeam(cfg.policy, np.random.default_rng(0))
        env = TrackingEnv(cfg.env)
        ep, infos, total = collect_episode(env, team, 0.3,
                                           np.random.default_rng(9))
        acc = 0.0
        for r in ep.rewards:
            acc += float(r)
        assert total == acc
        np.testing.assert_array_equal(ep.rewards,
                                      [i["reward"] for i in infos])


class TestTdUpdate:
    def test_single_slot_episode_loss_is_residual_only(self):
        """With one-slot episodes the bootstrap vanishes (done at slot
        0), so the loss must equal sum((r - mixed value)^2) whatever
        gamma is."""
        cfg = RunConfig(env=EnvConfig(steps_per_episode=1))
        team, mixer, target_team, target_mixer = fresh_nets(cfg, seed=1)
        env = TrackingEnv(cfg.env)
        rng = np.random.default_rng(2)
        batch = []
        for _ in range(3):
            ep, _, _ = collect_episode(env, team, 1.0, rng)
            batch.append(ep)

        expected = 0.0
        with nn.no_grad():
            for ep in batch:
                state = team.init_state(1)
                from gaxnet.training import _team_inputs
                stacked, rows, e = _team_inputs(ep.obs[0][:, None, :],
                                                False, 3)
                q, _, _, state = team.step(stacked, rows, e, state)
                chosen = np.array([q.data[n, 0, ep.actions[0, n]]
                                   for n in range(4)])
                q_tot = mixer.mix(nn.tensor(chosen[None, :]),
                                  ep.states[0][None, :]).data[0]
                expected += (q_tot - ep.rewards[0]) ** 2

        loss = td_update(team, target_team, mixer, target_mixer, batch,
                         gamma=0.99, lr=1e-9)
        assert loss == pytest.approx(expected, rel=1e-9)

    def test_zero_value_zero_reward_fixed_point(self):
        cfg = tiny_run_config()
        team, mixer, target_team, target_mixer = fresh_nets(cfg, seed=3)
        for store in (mixer.store, target_mixer.store):
            for name in ("w2.w", "w2.b", "b2_in.w", "b2_in.b",
                         "b2_out.w", "b2_out.b"):
                store[name].data[:] = 0.0
        rng = np.random.default_rng(4)
        dones = np.zeros(5, dtype=bool)
        dones[-1] = True
        batch = [Episode(obs=rng.normal(size=(5, 4, 22)),
                         states=rng.normal(size=(5, 180)),
                         actions=rng.integers(0, 8, size=(5, 4)),
                         rewards=np.zeros(5), dones=dones)
                 for _ in range(2)]
        loss = td_update(team, target_team, mixer, target_mixer, batch,
                         gamma=0.99, lr=1e-9)
        assert loss == 0.0

    def test_same_batch_same_loss(self):
        cfg = tiny_run_config()
        rng = np.random.default_rng(5)
        env = TrackingEnv(cfg.env)
        team_a, mixer_a, tt_a, tm_a = fresh_nets(cfg, seed=6)
        batch = []
        for _ in range(3):
            ep, _, _ = collect_episode(env, team_a, 1.0, rng)
            batch.append(ep)
        team_b, mixer_b, tt_b, tm_b = fresh_nets(cfg, seed=6)
        loss_a = td_update(team_a, tt_a, mixer_a, tm_a, batch, 0.99, 8e-4)
        loss_b = td_update(team_b, tt_b, mixer_b, tm_b, batch, 0.99, 8e-4)
        assert loss_a == loss_b

    def test_update_moves_parameters(self):
        cfg = tiny_run_config()
        team, mixer, tt, tm = fresh_nets(cfg, seed=7)
        env = TrackingEnv(cfg.env)
        rng = np.random.default_rng(8)
        ep, _, _ = collect_episode(env, team, 1.0, rng)
        before = team.store["enc_own.w"].data.copy()
        td_update(team, tt, mixer, tm, [ep], 0.99, 8e-4)
        assert not np.array_equal(before, team.store["enc_own.w"].data)

    def test_baseline_mode_updates_too(self):
        cfg = RunConfig(policy=PolicyConfig(baseline=True),
                        train=TrainConfig(seed=0))
        team, mixer, tt, tm = fresh_nets(cfg, seed=9)
        env = TrackingEnv(cfg.env)
        rng = np.random.default_rng(10)
        ep, _, _ = collect_episode(env, team, 1.0, rng)
        loss = td_update(team, tt, mixer, tm, [ep], 0.99, 1e-4)
        assert np.isfinite(loss) and loss > 0.0


class TestUpdateTarget:
    def test_copy_aligns_target_outputs(self):
        cfg = tiny_run_config()
        team, mixer, tt, tm = fresh_nets(cfg, seed=11)
        env = TrackingEnv(cfg.env)
        rng = np.random.default_rng(12)
        ep, _, _ = collect_episode(env, team, 1.0, rng)
        td_update(team, tt, mixer, tm, [ep], 0.99, 8e-4)
        # online has moved away from the target copy
        assert not np.array_equal(team.store["enc_own.w"].data,
                                  tt.store["enc_own.w"].data)
        update_target(team, tt, mixer, tm)
        for name in team.store.names():
            np.testing.assert_array_equal(team.store[name].data,
                                          tt.store[name].data)
        for name in mixer.store.names():
            np.testing.assert_array_equal(mixer.store[name].data,
                                          tm.store[name].data)


class TestNullBaseline:
    def test_summary_fields_and_determinism(self):
        cfg = RunConfig()
        a = null_baseline(cfg, episodes=3, rng=np.random.default_rng(13))
        b = null_baseline(cfg, episodes=3, rng=np.random.default_rng(13))
        assert a == b
        assert a["episodes"] == 3
        assert np.isfinite(a["mean_reward"])
        assert a["collision_count"] >= 0 and a["in_range_count"] >= 0


class TestTrainLoop:
    def test_artifacts_and_csv_shape(self, tmp_path):
        cfg = tiny_run_config()
        res = train(cfg, tmp_path / "run")
        assert res.csv_path.exists()
        assert res.trajectory_path.exists()
        assert res.checkpoint_path.exists()
        assert res.manifest_path.exists()
        lines = res.csv_path.read_text().splitlines()
        assert lines[0] == ("iteration,epsilon,loss,episode_reward,"
                            "collision_count,in_range_count")
        assert len(lines) == 1 + cfg.train.iterations

    def test_loss_column_empty_until_replay_fills(self, tmp_path):
        cfg = tiny_run_config()
        res = train(cfg, tmp_path / "run")
        rows = [line.split(",")
                for line in res.csv_path.read_text().splitlines()[1:]]
        for row in rows[:cfg.train.batch_size - 1]:
            assert row[2] == ""
        for row in rows[cfg.train.batch_size - 1:]:
            assert float(row[2]) > 0.0

    def test_reward_column_recomputes_from_trajectory(self, tmp_path):
        cfg = tiny_run_config()
        res = train(cfg, tmp_path / "run")
        per_iteration: dict[int, float] = {}
        with open(res.trajectory_path) as fh:
            for line in fh:
                rec = json.loads(line)
                acc = per_iteration.setdefault(rec["iteration"], 0.0)
                per_iteration[rec["iteration"]] = acc + rec["reward"]
        for line in res.csv_path.read_text().splitlines()[1:]:
            parts = line.split(",")
            assert float(parts[3]) == per_iteration[int(parts[0])]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = tiny_run_config(seed=2)
        res1 = train(cfg, tmp_path / "a")
        res2 = train(cfg, tmp_path / "b")
        for a, b in ((res1.csv_path, res2.csv_path),
                     (res1.trajectory_path, res2.trajectory_path),
                     (res1.checkpoint_path, res2.checkpoint_path)):
            assert a.read_bytes() == b.read_bytes()

    def test_checkpoint_loads_for_execution(self, tmp_path):
        from gaxnet.checkpoint import load_checkpoint
        cfg = tiny_run_config()
        res = train(cfg, tmp_path / "run")
        payload = load_checkpoint(res.checkpoint_path, config=cfg)
        team = ActorTeam(payload["policy"], np.random.default_rng(0))
        team.load_state_dict(payload["actors"])
        assert payload["iteration"] == cfg.train.iterations

    def test_periodic_checkpoints_written(self, tmp_path):
        cfg = tiny_run_config(iterations=9, checkpoint_period=4)
        res = train(cfg, tmp_path / "run")
        assert (res.out_dir / "checkpoint_000004.json").exists()
        assert (res.out_dir / "checkpoint_000008.json").exists()
        assert res.checkpoint_path.exists()

    def test_nonfinite_update_aborts_with_diagnostic(self, tmp_path,
                                                     monkeypatch):
        """A non-finite value inside the update (the nn core raises on
        any such value; see the nn suite) must leave a diagnostic
        checkpoint behind and stop the run."""
        import gaxnet.training as training_module

        def explode(*args, **kwargs):
            raise nn.NumericError("injected non-finite loss")

        monkeypatch.setattr(training_module, "td_update", explode)
        cfg = tiny_run_config(iterations=10, batch_size=2)
        with pytest.raises(nn.NumericError):
            train(cfg, tmp_path / "run")
        diag = tmp_path / "run" / "checkpoint_diagnostic.json"
        assert diag.exists()
        payload = json.loads(diag.read_text())
        assert payload["note"] == "aborted on non-finite loss"
        assert payload["mixer"] is not None

    def test_manifest_records_config_and_probe(self, tmp_path):
        cfg = tiny_run_config()
        res = train(cfg, tmp_path / "run")
        manifest = json.loads(res.manifest_path.read_text())
        assert manifest["config_hash"] == cfg.config_hash()
        assert manifest["mixer_monotonicity_violations"] == 0
        assert manifest["config"]["train"]["batch_size"] == 4

    def test_format_float_roundtrips(self):
        for x in (0.1, 1.0 / 3.0, 938.0, 2.88e-5, -0.92):
            assert float(format_float(x)) == x
