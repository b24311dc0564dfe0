import json
import os
import time

import numpy as np
import pytest

from cmbac.checkpoint import load_checkpoint, save_checkpoint
from cmbac.config import TrainerConfig
from cmbac.envs import Point2DEnv, scripted_point_policy
from cmbac.errors import CheckpointError, ConfigError
from cmbac.rng import STREAM_NAMES, RngBundle, make_stream
from cmbac.trainer import Trainer, evaluate_policy


def _tiny(**overrides):
    base = dict(
        epochs=2, steps_per_epoch=10, updates_per_step=2, init_random_steps=60,
        min_model_samples=40, model_train_steps=12, rollouts_per_step=3,
        batch_size=24, eval_episodes=2, seed=3,
    )
    base.update(overrides)
    return TrainerConfig(**base)


# ---------------------------------------------------------------------------
# config


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        TrainerConfig.from_dict({"learning_rate": 0.1})


def test_config_rejects_wrong_types():
    with pytest.raises(ConfigError):
        TrainerConfig.from_dict({"epochs": 2.5})
    with pytest.raises(ConfigError):
        TrainerConfig.from_dict({"auto_alpha": "yes"})
    with pytest.raises(ConfigError):
        TrainerConfig.from_dict({"model_hidden": 64})


def test_config_file_round_trip(tmp_path):
    cfg = _tiny(variant="redq_cmbac", drop_count=2)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict()))
    loaded = TrainerConfig.from_file(path)
    assert loaded.to_dict() == cfg.to_dict()


def test_config_validates_ranges():
    with pytest.raises(ConfigError):
        TrainerConfig(epochs=0).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(networks_per_model=6).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(discount=1.5).validate()
    with pytest.raises(ConfigError):
        TrainerConfig(networks_per_model=5, drop_count=1).resolved()  # K=1 forbids L=1


def test_config_bad_json_message(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        TrainerConfig.from_file(path)


# ---------------------------------------------------------------------------
# rng streams


def test_streams_are_deterministic_and_distinct():
    b1 = RngBundle(5)
    b2 = RngBundle(5)
    draws1 = {name: getattr(b1, name).standard_normal(4) for name in STREAM_NAMES}
    draws2 = {name: getattr(b2, name).standard_normal(4) for name in STREAM_NAMES}
    for name in STREAM_NAMES:
        np.testing.assert_array_equal(draws1[name], draws2[name])
    flat = np.concatenate(list(draws1.values()))
    assert len(np.unique(np.round(flat, 12))) == flat.size  # streams do not collide


def test_stream_state_round_trip():
    b = RngBundle(9)
    b.env.standard_normal(7)
    state = b.state()
    after = b.env.standard_normal(3)
    b2 = RngBundle(9)
    b2.load_state(state)
    np.testing.assert_array_equal(b2.env.standard_normal(3), after)


def test_make_stream_rejects_unknown():
    with pytest.raises(ValueError):
        make_stream(0, "bogus")


# ---------------------------------------------------------------------------
# evaluation


class _ScriptedPolicy:
    def deterministic_np(self, s):
        return scripted_point_policy(s)

    def sample_np(self, s, rng):
        a = scripted_point_policy(s)
        return a, np.zeros(a.shape[0])


def test_evaluate_policy_scripted_oracle_reproducible():
    env = Point2DEnv()
    m1, s1 = evaluate_policy(_ScriptedPolicy(), env, 50, make_stream(0, "eval"))
    m2, s2 = evaluate_policy(_ScriptedPolicy(), env, 50, make_stream(0, "eval"))
    assert m1 == m2 and s1 == s2
    assert 2.3 < m1 < 2.5  # near 49 * 0.05 + approach rewards


def test_evaluate_policy_rejects_zero_episodes():
    with pytest.raises(ConfigError):
        evaluate_policy(_ScriptedPolicy(), Point2DEnv(), 0, make_stream(0, "eval"))


def test_evaluate_policy_single_episode_mean_is_episode_return():
    env = Point2DEnv()
    rng = make_stream(4, "eval")
    mean, std = evaluate_policy(_ScriptedPolicy(), env, 1, rng)
    assert std == 0.0
    s = env.reset(make_stream(4, "eval"), n=1)
    total = 0.0
    for _ in range(env.spec.horizon):
        a = scripted_point_policy(s)
        s, r = env.step(s, a)
        total += float(r[0])
    assert mean == pytest.approx(total, abs=1e-12)


# ---------------------------------------------------------------------------
# training loop bookkeeping


def test_epoch_accounting_and_rollout_counts():
    trainer = Trainer(_tiny(epochs=3))
    for n in range(1, 4):
        rec = trainer.train_epoch()
        assert rec["env_steps"] == n * 10
        # k = 1 model horizon: every env step appends rollouts_per_step transitions
        assert rec["rollout_added"] == 10 * 3
    assert trainer.env_steps == 30


def test_metric_stream_deterministic(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        Trainer(_tiny(), str(out)).run()
        outs.append((out / "metrics.jsonl").read_bytes())
    assert outs[0] == outs[1]
    manifest = json.loads((tmp_path / "a" / "run_manifest.json").read_text())
    assert manifest["parallel"] is False
    assert manifest["config"]["variant"] == "cmbac"


def test_different_seeds_differ(tmp_path):
    r1 = Trainer(_tiny(seed=1)).train_epoch()
    r2 = Trainer(_tiny(seed=2)).train_epoch()
    assert r1["eval_return_mean"] != r2["eval_return_mean"]


# ---------------------------------------------------------------------------
# checkpointing


def test_checkpoint_round_trip_parameters(tmp_path):
    trainer = Trainer(_tiny())
    trainer.train_epoch()
    path = tmp_path / "run.ckpt"
    save_checkpoint(trainer, path)
    twin = load_checkpoint(path)

    for p1, p2 in zip(trainer.policy.params(), twin.policy.params()):
        np.testing.assert_array_equal(p1.data, p2.data)
    for p1, p2 in zip(trainer.q1.params(), twin.q1.params()):
        np.testing.assert_array_equal(p1.data, p2.data)
    for n1, n2 in zip(trainer.ensemble.nets, twin.ensemble.nets):
        for p1, p2 in zip(n1.params(), n2.params()):
            np.testing.assert_array_equal(p1.data, p2.data)
    assert twin.ensemble.elites == trainer.ensemble.elites
    assert twin.epoch == trainer.epoch
    assert len(twin.model_buffer) == len(trainer.model_buffer)


def test_resume_reproduces_uninterrupted_run(tmp_path):
    straight = Trainer(_tiny(epochs=4))
    records_straight = [straight.train_epoch() for _ in range(4)]

    broken = Trainer(_tiny(epochs=4))
    broken.train_epoch()
    broken.train_epoch()
    path = tmp_path / "mid.ckpt"
    save_checkpoint(broken, path)

    resumed = load_checkpoint(path)
    records_resumed = [resumed.train_epoch() for _ in range(2)]

    for a, b in zip(records_straight[2:], records_resumed):
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    for p1, p2 in zip(straight.policy.params(), resumed.policy.params()):
        np.testing.assert_array_equal(p1.data, p2.data)


def test_corrupt_checkpoint_raises(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"CMBC" + b"\xff" * 32)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_truncation_raises(tmp_path):
    trainer = Trainer(_tiny())
    trainer.train_epoch()
    path = tmp_path / "run.ckpt"
    save_checkpoint(trainer, path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_non_finite_targets_abort_with_record(tmp_path):
    from cmbac.errors import TrainingAborted

    trainer = Trainer(_tiny(epochs=3, reward_mode="learned"), str(tmp_path / "run"))
    trainer.train_epoch()
    trainer.model_buffer.branch_r[: len(trainer.model_buffer)] = np.inf
    with pytest.raises(TrainingAborted):
        trainer.run()
    abort = json.loads((tmp_path / "run" / "abort.json").read_text())
    assert "non-finite" in abort["reason"]


def test_learned_reward_mode_trains():
    trainer = Trainer(_tiny(reward_mode="learned"))
    rec = trainer.train_epoch()
    assert rec["critic_loss"] is not None
    assert np.isfinite(rec["eval_return_mean"])


def test_pendulum_multi_step_rollouts():
    cfg = _tiny(
        env="pendulum", epochs=1, steps_per_epoch=6, horizon_start=2, horizon_end=3,
        horizon_ramp_start=1, horizon_ramp_end=2, init_random_steps=80,
        min_model_samples=60,
    )
    trainer = Trainer(cfg)
    rec = trainer.train_epoch()
    # epoch 1 sits at the ramp start: k = 2, no truncation on a sane model
    assert rec["model_horizon"] == 2
    assert rec["rollout_added"] == 6 * 3 * 2
    assert np.isfinite(rec["eval_return_mean"])


def test_env_horizon_override():
    trainer = Trainer(_tiny(env_horizon=20))
    assert trainer.env.spec.horizon == 20
    trainer.train_epoch()
    # episodes now terminate every 20 steps
    assert trainer.env_buffer.done[: len(trainer.env_buffer)].sum() >= 3


# ---------------------------------------------------------------------------
# smoke budget


def test_point2d_smoke_config_completes_quickly(tmp_path):
    cfg = TrainerConfig.from_file(os.path.join(os.path.dirname(__file__), "..", "configs", "point2d_smoke.json"))
    start = time.perf_counter()
    trainer = Trainer(cfg, str(tmp_path / "smoke"))
    trainer.run()
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"smoke run took {elapsed:.1f}s"
    assert trainer.epoch == 5
    assert (tmp_path / "smoke" / "checkpoint_final.ckpt").exists()
    assert trainer.metrics[-1]["eval_return_mean"] > 1.0
