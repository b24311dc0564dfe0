import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmbac.envs import (
    NoisyActionEnv,
    PendulumEnv,
    Point2DEnv,
    make_env,
    noisy_action,
    scripted_point_policy,
)
from cmbac.errors import ConfigError

# full 50-step scripted-policy return from the worst corner (2, 2), frozen
# from the rollout below: one step at exp(-0.4) reward plus 49 steps at the
# goal
WORST_CORNER_RETURN = 0.05 * np.exp(-0.4) + 49 * 0.05


def test_point_step_at_goal_with_zero_action():
    env = Point2DEnv()
    s_next, r = env.step(np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(s_next, np.zeros(2))
    assert r == pytest.approx(0.05, abs=0)


def test_point_step_clips_at_box_edge():
    env = Point2DEnv()
    s_next, _ = env.step(np.array([2.0, 2.0]), np.array([1.0, 1.0]))
    np.testing.assert_array_equal(s_next, [2.0, 2.0])


def test_point_step_reach_goal_exactly():
    env = Point2DEnv()
    s_next, r = env.step(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    np.testing.assert_array_equal(s_next, np.zeros(2))
    assert r == pytest.approx(0.05, abs=0)


def test_point_reward_is_maximal_only_at_goal():
    env = Point2DEnv()
    rng = np.random.default_rng(0)
    s = rng.uniform(-2, 2, size=(200, 2))
    a = rng.uniform(-1, 1, size=(200, 2))
    s_next, r = env.step(s, a)
    at_goal = (s_next == 0).all(axis=1)
    assert (r[~at_goal] < 0.05).all()
    # strictly decreasing in distance: sort by distance, rewards reverse-sorted
    d = np.linalg.norm(s_next, axis=1)
    order = np.argsort(d)
    assert (np.diff(r[order]) <= 0).all()


def test_point_goal_is_fixed_point():
    env = Point2DEnv()
    s = np.zeros(2)
    for _ in range(5):
        s, r = env.step(s, np.zeros(2))
    np.testing.assert_array_equal(s, np.zeros(2))
    assert r == 0.05


def test_point_reset_reproducible_and_in_box():
    env = Point2DEnv()
    s1 = env.reset(np.random.default_rng(3), n=32)
    s2 = env.reset(np.random.default_rng(3), n=32)
    assert np.array_equal(s1, s2)
    assert (np.abs(s1) <= 2).all()


def test_point_reset_mean_near_center():
    env = Point2DEnv()
    s = env.reset(np.random.default_rng(0), n=10_000)
    assert np.abs(s.mean(axis=0)).max() < 0.1


def test_pendulum_upright_rest_zero_reward():
    env = PendulumEnv()
    s = np.array([1.0, 0.0, 0.0])  # theta = 0
    _, r = env.step(s, np.zeros(1))
    assert r == pytest.approx(0.0, abs=1e-12)


def test_pendulum_hanging_rest_reward():
    env = PendulumEnv()
    s = np.array([-1.0, 0.0, 0.0])  # theta = pi
    _, r = env.step(s, np.zeros(1))
    assert r == pytest.approx(-np.pi**2, rel=1e-12)


def test_pendulum_velocity_stays_clamped():
    env = PendulumEnv()
    rng = np.random.default_rng(1)
    s = env.reset(rng)
    for _ in range(500):
        a = rng.uniform(-2, 2, size=1)
        s, _ = env.step(s, a)
        assert abs(s[2]) <= env.max_speed


def test_noisy_action_sigma_zero_identity():
    a = np.array([0.3, -0.7])
    out = noisy_action(a, 0.0, None, -1.0, 1.0)
    np.testing.assert_array_equal(out, a)


def test_noisy_action_std_matches_sigma():
    rng = np.random.default_rng(0)
    a = np.zeros((100_000, 2))  # interior action: clipping never binds at 3 sigma... keep raw
    out = a + rng.normal(0.0, 0.1, size=a.shape)  # pre-clip reference draw
    # the wrapper draws from the same distribution; check its per-dim std
    rng2 = np.random.default_rng(0)
    wrapped = noisy_action(a, 0.1, rng2, -1.0, 1.0)
    assert np.allclose(wrapped.std(axis=0), 0.1, rtol=0.05)
    assert np.allclose(out.std(axis=0), wrapped.std(axis=0), rtol=0.05)


def test_noisy_action_always_inside_box():
    rng = np.random.default_rng(5)
    a = rng.uniform(-1, 1, size=(5000, 2))
    out = noisy_action(a, 0.5, rng, -1.0, 1.0)
    assert (out >= -1.0).all() and (out <= 1.0).all()


def test_scripted_policy_basics():
    np.testing.assert_array_equal(scripted_point_policy(np.zeros(2)), np.zeros(2))
    np.testing.assert_array_equal(scripted_point_policy(np.array([2.0, 2.0])), [-1.0, -1.0])


def test_scripted_policy_worst_corner_return_matches_frozen_oracle():
    env = Point2DEnv()
    s = np.array([2.0, 2.0])
    total = 0.0
    for _ in range(env.spec.horizon):
        a = scripted_point_policy(s)
        s, r = env.step(s, a)
        total += r
    assert total == pytest.approx(WORST_CORNER_RETURN, abs=1e-12)


def test_step_deterministic_given_state_action():
    for env in (Point2DEnv(), PendulumEnv()):
        rng = np.random.default_rng(0)
        s = env.reset(rng)
        a = rng.uniform(env.spec.action_low, env.spec.action_high)
        out1 = env.step(s, a)
        out2 = env.step(s, a)
        np.testing.assert_array_equal(out1[0], out2[0])
        assert out1[1] == out2[1]


def test_make_env_registry():
    assert make_env("point2d").spec.name == "point2d"
    assert make_env("pendulum").spec.horizon == 200
    noisy = make_env("point2d-noisy", noise_sigma=0.2)
    assert isinstance(noisy, NoisyActionEnv)
    assert noisy.sigma == 0.2
    assert make_env("pendulum-noisy").spec.name == "pendulum-noisy"
    with pytest.raises(ConfigError):
        make_env("mujoco-humanoid")


def test_noisy_env_uses_rng_and_stores_base_dynamics():
    env = make_env("point2d-noisy", noise_sigma=0.1)
    s = np.zeros(2)
    a = np.array([0.5, 0.5])
    s1, _ = env.step(s, a, np.random.default_rng(0))
    s2, _ = env.step(s, a, np.random.default_rng(0))
    s3, _ = env.step(s, a, np.random.default_rng(1))
    assert np.array_equal(s1, s2)
    assert not np.array_equal(s1, s3)


@settings(max_examples=50, deadline=None)
@given(
    sx=st.floats(-2, 2), sy=st.floats(-2, 2),
    ax=st.floats(-1, 1), ay=st.floats(-1, 1),
)
def test_point_step_stays_in_box(sx, sy, ax, ay):
    env = Point2DEnv()
    s_next, r = env.step(np.array([sx, sy]), np.array([ax, ay]))
    assert (np.abs(s_next) <= 2).all()
    assert np.isfinite(r) and 0 < r <= 0.05
