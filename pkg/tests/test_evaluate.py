"""Greedy-evaluation pipeline: per-slot records, CSV artifacts, the
reciprocity metric, and the channel study table."""

import json
import math
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gaxnet import channel
from gaxnet.channel import ChannelParams
from gaxnet.checkpoint import CheckpointError, save_checkpoint
from gaxnet.config import RunConfig
from gaxnet.evaluate import (
    EXCHANGE_COLUMNS,
    METRICS_COLUMNS,
    channel_table,
    run_episode,
    run_eval,
    symmetry_mse,
    write_channel_table,
)
from gaxnet.policy import ActorTeam, neighbor_ids


def short_config(**mode) -> RunConfig:
    cfg = RunConfig()
    cfg = replace(cfg, env=replace(cfg.env, steps_per_episode=6))
    return cfg.with_mode(**mode) if mode else cfg


def fresh_actors(cfg: RunConfig, seed: int = 7):
    team = ActorTeam(cfg.policy, np.random.default_rng(seed))
    return team, [team.actor(n) for n in range(cfg.env.n_agents)]


class TestSymmetryMse:
    def test_reciprocal_constant_traffic_scores_zero(self):
        sym = np.array([[0.0, 0.3, 0.5],
                        [0.3, 0.0, 0.2],
                        [0.5, 0.2, 0.0]])
        mats = np.stack([sym] * 5)
        mse, peak = symmetry_mse(mats)
        assert mse == 0.0
        assert peak == 0.0

    def test_two_agent_case_by_hand(self):
        a, b, c, d = 0.8, 0.1, 0.4, 0.9
        mats = np.array([[[0.0, a], [b, 0.0]],
                         [[0.0, c], [d, 0.0]]])
        mse, peak = symmetry_mse(mats)
        # slot 1 versus the transpose of slot 0: c answers b, d answers a
        assert mse == pytest.approx(((c - b) ** 2 + (d - a) ** 2) / 2.0)
        assert peak == pytest.approx(max(abs(c - b), abs(d - a)))

    def test_pair_count_scales_with_slots(self):
        rng = np.random.default_rng(0)
        mats = rng.uniform(size=(7, 4, 4))
        mats[:, np.arange(4), np.arange(4)] = 0.0
        diffs = mats[1:] - mats[:-1].transpose(0, 2, 1)
        off = ~np.eye(4, dtype=bool)
        expect = float(np.mean(diffs[:, off] ** 2))
        assert symmetry_mse(mats)[0] == pytest.approx(expect, rel=1e-12)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            symmetry_mse(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            symmetry_mse(np.zeros((3, 4, 5)))
        with pytest.raises(ValueError):
            symmetry_mse(np.zeros((1, 4, 4)))


class TestRunEpisode:
    def test_one_record_per_slot(self):
        cfg = short_config()
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 3, np.random.default_rng(1))
        assert [r.slot for r in records] == list(range(6))
        assert all(r.episode == 3 for r in records)

    def test_attention_rows_normalized_with_zero_diagonal(self):
        cfg = short_config()
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(2))
        for rec in records:
            assert np.all(np.diag(rec.attention) == 0.0)
            assert np.allclose(rec.attention.sum(axis=1), 1.0)

    def test_sent_values_are_unit_interval_readouts(self):
        cfg = short_config()
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(3))
        off = ~np.eye(cfg.env.n_agents, dtype=bool)
        for rec in records:
            vals = rec.exchange[off]
            assert np.all((vals > 0.0) & (vals < 1.0))
            assert np.all(np.diag(rec.exchange) == 0.0)

    def test_raw_mode_sends_the_attention_weights(self):
        cfg = short_config(exchange_raw=True)
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(4))
        for rec in records:
            assert np.array_equal(rec.exchange, rec.attention)

    def test_serving_agent_is_nearest(self):
        cfg = short_config()
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(5))
        for rec in records:
            assert rec.serving_agent == int(np.argmin(rec.dists))
            assert rec.serving_dist == rec.dists[rec.serving_agent]

    def test_requirement_flag_matches_link_quality(self):
        cfg = short_config()
        cp = cfg.channel
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(6))
        for rec in records:
            s = channel.snr(rec.serving_dist, cp.altitude, cp)
            err = channel.error_rate(s, cp.t_max, cp)
            lat = channel.min_latency(s, cfg.requirement.target_error, cp)
            assert rec.error_rate == err
            assert rec.min_latency == lat
            want = (err <= cfg.requirement.target_error
                    and lat <= cfg.requirement.target_latency)
            assert rec.meets_requirement == want

    def test_collision_flags_come_in_pairs(self):
        cfg = short_config()
        cfg = replace(cfg, env=replace(cfg.env, collision_dist=1300.0,
                                       urllc_range=1400.0))
        _, actors = fresh_actors(cfg)
        crowded = []
        for seed in range(20):
            records = run_episode(cfg, actors, 0,
                                  np.random.default_rng(seed))
            crowded += [r for r in records if r.collision_pairs > 0]
            if crowded:
                break
        assert crowded, "a 1.3 km separation limit should trip somewhere"
        for rec in crowded:
            assert rec.collision_flags.sum() >= 2

    def test_baseline_mode_has_silent_matrices(self):
        cfg = short_config(baseline=True)
        _, actors = fresh_actors(cfg)
        records = run_episode(cfg, actors, 0, np.random.default_rng(8))
        for rec in records:
            assert np.all(rec.attention == 0.0)
            assert np.all(rec.exchange == 0.0)


class TestRunEval:
    @pytest.fixture()
    def setup(self, tmp_path):
        cfg = short_config()
        team, _ = fresh_actors(cfg, seed=11)
        ckpt = tmp_path / "ckpt.json"
        save_checkpoint(ckpt, config=cfg, iteration=0,
                        actors=team.state_dict())
        return cfg, ckpt, tmp_path

    def test_artifact_files_and_row_counts(self, setup):
        cfg, ckpt, tmp = setup
        res = run_eval(ckpt, cfg, episodes=3, seed=0, out_dir=tmp / "ev")
        metrics = res.metrics_path.read_text().splitlines()
        exchange = res.exchange_path.read_text().splitlines()
        assert metrics[0] == ",".join(METRICS_COLUMNS)
        assert exchange[0] == ",".join(EXCHANGE_COLUMNS)
        slots = cfg.env.steps_per_episode
        assert len(metrics) == 1 + 3 * slots
        assert len(exchange) == 1 + 3 * slots * 4 * 3
        assert res.summary_path.exists()

    def test_written_floats_round_trip(self, setup):
        cfg, ckpt, tmp = setup
        res = run_eval(ckpt, cfg, episodes=2, seed=0, out_dir=tmp / "ev")
        header, *rows = res.metrics_path.read_text().splitlines()
        cols = header.split(",")
        attn_idx = [cols.index(f"attn_{n}_{m}")
                    for n in range(4) for m in range(4)]
        for row in rows:
            cells = row.split(",")
            attn = np.array([float(cells[i]) for i in attn_idx]).reshape(4, 4)
            assert np.all(np.diag(attn) == 0.0)
            # parsed rows still sum to one: 17 significant digits kept
            # the exact doubles
            assert np.allclose(attn.sum(axis=1), 1.0, atol=1e-12)
        for line in res.exchange_path.read_text().splitlines()[1:]:
            val = float(line.split(",")[4])
            assert 0.0 < val < 1.0

    def test_summary_contents(self, setup):
        cfg, ckpt, tmp = setup
        res = run_eval(ckpt, cfg, episodes=3, seed=5, out_dir=tmp / "ev")
        s = res.summary
        assert s["episodes"] == 3
        assert s["seed"] == 5
        assert s["config_hash"] == cfg.config_hash()
        assert len(s["symmetry_mse_per_episode"]) == 3
        assert s["symmetry_mse_mean"] == pytest.approx(
            float(np.mean(s["symmetry_mse_per_episode"])))
        assert 0.0 <= s["fraction_meeting_requirement"] <= 1.0
        loaded = json.loads(res.summary_path.read_text())
        assert loaded == s

    def test_summary_reciprocity_recomputes_from_attention_columns(
            self, setup):
        cfg, ckpt, tmp = setup
        res = run_eval(ckpt, cfg, episodes=2, seed=3, out_dir=tmp / "ev")
        header, *rows = res.metrics_path.read_text().splitlines()
        cols = header.split(",")
        attn_idx = [cols.index(f"attn_{n}_{m}")
                    for n in range(4) for m in range(4)]
        ep_idx = cols.index("episode")
        for ep, want in enumerate(res.summary["symmetry_mse_per_episode"]):
            mats = np.array([[float(r.split(",")[i]) for i in attn_idx]
                             for r in rows
                             if int(r.split(",")[ep_idx]) == ep])
            got, _ = symmetry_mse(mats.reshape(-1, 4, 4))
            assert got == pytest.approx(want, rel=1e-12)

    def test_same_seed_reproduces_bytes(self, setup):
        cfg, ckpt, tmp = setup
        a = run_eval(ckpt, cfg, episodes=2, seed=9, out_dir=tmp / "a")
        b = run_eval(ckpt, cfg, episodes=2, seed=9, out_dir=tmp / "b")
        assert a.metrics_path.read_bytes() == b.metrics_path.read_bytes()
        assert a.exchange_path.read_bytes() == b.exchange_path.read_bytes()

    def test_config_mismatch_is_refused(self, setup):
        cfg, ckpt, tmp = setup
        other = replace(cfg, train=replace(cfg.train, seed=99))
        with pytest.raises(CheckpointError):
            run_eval(ckpt, other, episodes=1, seed=0, out_dir=tmp / "x")


class TestChannelTable:
    def test_operating_point_is_appended(self):
        cfg = RunConfig()
        rows = channel_table(cfg, np.array([100.0, 500.0]),
                             np.array([1e-5, 2e-5]))
        assert len(rows) == 5
        d_op, t_op = cfg.env.urllc_range, cfg.channel.t_max
        assert sum(1 for r in rows if r[0] == d_op and r[1] == t_op) == 1

    def test_grid_point_not_duplicated(self):
        cfg = RunConfig()
        rows = channel_table(cfg, np.array([cfg.env.urllc_range]),
                             np.array([cfg.channel.t_max]))
        assert len(rows) == 1

    def test_error_monotone_in_distance(self):
        cfg = RunConfig()
        d = np.linspace(100.0, 5000.0, 12)
        rows = channel_table(cfg, d, np.array([cfg.channel.t_max]))
        errs = [r[3] for r in rows if r[1] == cfg.channel.t_max
                and r[0] in d]
        assert all(b >= a for a, b in zip(errs, errs[1:]))

    def test_error_monotone_in_duration(self):
        cfg = RunConfig()
        t = np.linspace(5e-6, 1e-4, 10)
        rows = channel_table(cfg, np.array([2000.0]), t)
        errs = [r[3] for r in rows if r[0] == 2000.0]
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_csv_writer(self, tmp_path):
        cfg = RunConfig()
        path = write_channel_table(cfg, [100.0, 200.0], [1e-5],
                                   tmp_path / "tbl.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "distance_m,duration_s,snr_db,error_rate"
        assert len(lines) == 4  # 2 x 1 grid plus the operating point
        for line in lines[1:]:
            d, t, snr_db, err = (float(x) for x in line.split(","))
            assert err >= 0.0


@pytest.fixture(scope="module")
def tuned():
    modest = replace(ChannelParams(), tx_power=20.0)
    res = channel.calibrate_altitude(938.0, 1e-7, modest.t_max, modest)
    assert res.achieved
    return replace(modest, altitude=res.altitude)


class TestRequirementBoundary:
    """With transmit power tuned so the service radius is exactly the
    configured 938 m, distance against the radius decides the outcome."""

    def test_inside_the_radius_everything_meets(self, tuned):
        for d in [1.0, 200.0, 500.0, 900.0, 937.0]:
            s = channel.snr(d, tuned.altitude, tuned)
            assert channel.error_rate(s, tuned.t_max, tuned) <= 1e-7
            assert channel.min_latency(s, 1e-7, tuned) <= 3.9e-5

    def test_outside_the_radius_reliability_fails(self, tuned):
        for d in [940.0, 1000.0, 2000.0, 3000.0]:
            s = channel.snr(d, tuned.altitude, tuned)
            assert channel.error_rate(s, tuned.t_max, tuned) > 1e-7


def test_execution_side_never_imports_the_trainer():
    code = ("import sys\n"
            "import gaxnet.evaluate, gaxnet.cli\n"
            "bad = [m for m in ('gaxnet.training', 'gaxnet.mixer')\n"
            "       if m in sys.modules]\n"
            "sys.exit(1 if bad else 0)\n")
    proc = subprocess.run([sys.executable, "-c", code],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
