import numpy as np
import pytest

from cmbac.critic import MultiHeadQ
from cmbac.diagnostics import (
    collect_points,
    global_uncertainty,
    head_std_uncertainty,
    mc_return,
    model_estimate_records,
    scatter_records,
    spearman,
    write_model_estimates_csv,
    write_scatter_csv,
)
from cmbac.dynamics import GaussianEnsemble
from cmbac.envs import Point2DEnv, make_env, scripted_point_policy
from cmbac.policy import SquashedGaussianPolicy


class ScriptedPolicy:
    """Greedy point-env oracle with the policy sampling interface."""

    def sample_np(self, s, rng):
        a = scripted_point_policy(s)
        return a, np.zeros(a.shape[0] if a.ndim > 1 else 1)

    def deterministic_np(self, s):
        return scripted_point_policy(s)


def _pin_net(net, mean_vec, logvar_vec, bound=200.0):
    for p in net.mlp.params():
        p.data[...] = 0.0
    net.mlp.heads[0][1].data[...] = mean_vec
    net.mlp.heads[1][1].data[...] = logvar_vec
    net.max_logvar.data[...] = bound
    net.min_logvar.data[...] = -bound


def _unit_u_ensemble():
    """All networks emit variance 1/sqrt(d) per dim, so u(s, a) = 1 everywhere."""
    ens = GaussianEnsemble(2, 2, 3, 3, [4], 1e-3, np.random.default_rng(0))
    d = ens.out_dim
    for net in ens.nets:
        _pin_net(net, np.zeros(d), np.full(d, np.log(1.0 / np.sqrt(d))))
    ens.trained = True
    return ens


def _constant_critic(k, values, seed=0):
    q = MultiHeadQ(2, 2, [4], k, np.random.default_rng(seed))
    for p in q.params():
        p.data[...] = 0.0
    q.mlp.heads[0][1].data[...] = values
    return q


def test_head_std_zero_for_equal_heads():
    q = _constant_critic(4, 1.7)
    out = head_std_uncertainty(q, np.zeros((3, 2)), np.zeros((3, 2)))
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_head_std_population_convention():
    q = _constant_critic(2, np.array([0.0, 2.0]))
    out = head_std_uncertainty(q, np.zeros((1, 2)), np.zeros((1, 2)))
    assert out[0] == pytest.approx(1.0, abs=1e-12)


def test_head_std_matches_brute_force():
    rng = np.random.default_rng(1)
    q = MultiHeadQ(2, 2, [8], 5, rng)
    s = rng.normal(size=(6, 2))
    a = rng.normal(size=(6, 2))
    out = head_std_uncertainty(q, s, a)
    values = q.forward_np(s, a)
    brute = np.array([np.sqrt(np.mean((row - row.mean()) ** 2)) for row in values])
    np.testing.assert_allclose(out, brute, atol=1e-12)


def test_global_uncertainty_single_step_is_u():
    ens = _unit_u_ensemble()
    pol = ScriptedPolicy()
    out = global_uncertainty(ens, pol, np.zeros((3, 2)), np.zeros((3, 2)), 0.9, 1,
                             np.random.default_rng(0))
    np.testing.assert_allclose(out, 1.0, atol=1e-9)


def test_global_uncertainty_gamma_zero_is_u():
    ens = _unit_u_ensemble()
    out = global_uncertainty(ens, ScriptedPolicy(), np.zeros((2, 2)), np.zeros((2, 2)),
                             0.0, 5, np.random.default_rng(0))
    np.testing.assert_allclose(out, 1.0, atol=1e-9)


def test_global_uncertainty_geometric_sum():
    ens = _unit_u_ensemble()
    out = global_uncertainty(ens, ScriptedPolicy(), np.zeros((2, 2)), np.zeros((2, 2)),
                             0.5, 3, np.random.default_rng(0))
    np.testing.assert_allclose(out, 1.75, atol=1e-9)


def test_global_uncertainty_monotone_in_horizon():
    ens = _unit_u_ensemble()
    prev = None
    for steps in (1, 2, 4, 8):
        out = global_uncertainty(ens, ScriptedPolicy(), np.zeros((1, 2)), np.zeros((1, 2)),
                                 0.95, steps, np.random.default_rng(0))
        assert out[0] >= 0
        if prev is not None:
            assert out[0] > prev
        prev = out[0]


def test_mc_return_gamma_zero_is_first_reward():
    env = Point2DEnv()
    s = np.array([[1.0, 1.0]])
    a = np.array([[-0.5, -0.5]])
    out = mc_return(env, ScriptedPolicy(), s, a, 0.0, 3, np.random.default_rng(0))
    _, r = env.step(s[0], a[0])
    assert out[0] == pytest.approx(float(r), abs=1e-14)


def test_mc_return_at_goal_matches_geometric_series():
    env = Point2DEnv()
    gamma = 0.99
    out = mc_return(env, ScriptedPolicy(), np.zeros((1, 2)), np.zeros((1, 2)),
                    gamma, 1, np.random.default_rng(0))
    expected = 0.05 * (1 - gamma**50) / (1 - gamma)
    assert out[0] == pytest.approx(expected, rel=1e-12)


def test_mc_return_deterministic_setup_needs_single_episode():
    env = Point2DEnv()
    s = np.array([[1.5, -0.5]])
    a = np.array([[-1.0, 0.5]])
    one = mc_return(env, ScriptedPolicy(), s, a, 0.99, 1, np.random.default_rng(0))
    many = mc_return(env, ScriptedPolicy(), s, a, 0.99, 4, np.random.default_rng(1))
    assert one[0] == pytest.approx(many[0], abs=1e-12)


def test_mc_return_variance_shrinks_with_episodes():
    env = make_env("point2d-noisy", noise_sigma=0.3)
    pol = ScriptedPolicy()
    s = np.array([[1.0, 1.0]])
    a = np.array([[-0.5, 0.0]])

    def estimates(n_eps, n_repeats, seed0):
        return np.array([
            mc_return(env, pol, s, a, 0.99, n_eps, np.random.default_rng(seed0 + i))[0]
            for i in range(n_repeats)
        ])

    var1 = estimates(1, 120, 0).var()
    var16 = estimates(16, 120, 10_000).var()
    ratio = var1 / var16
    assert 6.0 < ratio < 45.0  # expect ~16 within statistical tolerance


# ---------------------------------------------------------------------------
# Spearman


def _spearman_oracle(x, y):
    """rank-then-Pearson with average ranks, written independently."""
    def rank(v):
        v = np.asarray(v, dtype=float)
        out = np.empty(v.size)
        for i, val in enumerate(v):
            less = (v < val).sum()
            equal = (v == val).sum()
            out[i] = less + (equal - 1) / 2.0
        return out

    rx, ry = rank(x), rank(y)
    return float(np.corrcoef(rx, ry)[0, 1])


def test_spearman_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=60)
        y = rng.normal(size=60)
        assert spearman(x, y) == pytest.approx(_spearman_oracle(x, y), abs=1e-12)


def test_spearman_with_ties_matches_oracle():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 5, size=80).astype(float)
    y = rng.integers(0, 5, size=80).astype(float)
    assert spearman(x, y) == pytest.approx(_spearman_oracle(x, y), abs=1e-12)


def test_spearman_perfect_estimator_is_one():
    rng = np.random.default_rng(2)
    err = np.abs(rng.normal(size=50))
    assert spearman(err, err) == pytest.approx(1.0, abs=1e-12)
    assert spearman(-err, err) == pytest.approx(-1.0, abs=1e-12)


def test_spearman_constant_input_is_zero():
    assert spearman(np.ones(10), np.arange(10.0)) == 0.0


# ---------------------------------------------------------------------------
# record emission


def _stub_setup():
    env = Point2DEnv()
    policy = SquashedGaussianPolicy(2, 2, [8], np.random.default_rng(0), [-1, -1], [1, 1])
    q1 = MultiHeadQ(2, 2, [8], 3, np.random.default_rng(1))
    q2 = MultiHeadQ(2, 2, [8], 3, np.random.default_rng(2))
    ens = _unit_u_ensemble()
    return env, policy, [q1, q2], ens


def test_collect_points_counts_and_ranges():
    env, policy, _, _ = _stub_setup()
    s, a = collect_points(env, policy, 120, np.random.default_rng(0))
    assert s.shape == (120, 2) and a.shape == (120, 2)
    assert (np.abs(s) <= 2).all() and (np.abs(a) <= 1).all()


def test_scatter_records_and_csv(tmp_path):
    env, policy, critics, ens = _stub_setup()
    columns, corr = scatter_records(
        env, policy, critics, ens, n_points=40, gamma=0.99, mc_episodes=2,
        rng=np.random.default_rng(3), aggregation="bottom_k", drop=1, penalty=0.0,
    )
    assert set(corr) == {"head_std", "global"}
    assert columns["abs_q_error"].shape == (40,)
    np.testing.assert_allclose(
        columns["abs_q_error"], np.abs(columns["q_estimate"] - columns["mc_return"]), atol=1e-14
    )
    # correlations recompute from emitted columns
    assert corr["head_std"] == pytest.approx(
        spearman(columns["head_std"], columns["abs_q_error"]), abs=1e-14
    )

    path = tmp_path / "scatter.csv"
    write_scatter_csv(path, columns)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "s0,s1,a0,a1,head_std,global,q_estimate,mc_return,abs_q_error"
    assert len(lines) == 41
    parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_allclose(parsed[:, 4], columns["head_std"], atol=0)


def test_model_estimate_records_and_csv(tmp_path):
    env, policy, critics, _ = _stub_setup()
    records = model_estimate_records(
        env, policy, critics[0], n_points=25, gamma=0.99, mc_episodes=2,
        rng=np.random.default_rng(4),
    )
    assert records["q_heads"].shape == (25, 3)
    # true return bounded by the per-step reward cap over the horizon
    assert (records["mc_return"] <= 0.05 * 50 + 1e-12).all()

    path = tmp_path / "model_estimates.csv"
    write_model_estimates_csv(path, records)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "s0,s1,a0,a1,q_head_0,q_head_1,q_head_2,mc_return"
    parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    sorted_heads = np.sort(parsed[:, 4:7], axis=1)
    assert (np.diff(sorted_heads, axis=1) >= 0).all()
