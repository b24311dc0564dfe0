"""Uncertainty-quality and overestimation analyses.

Evaluation points are state-action pairs from on-policy episodes in the
true environment under a frozen stochastic policy. For each point we can
compute uncertainty estimates (head spread, discounted model-error sum),
the agent's value estimate, and a Monte-Carlo ground-truth return; rank
correlations score how well each estimator tracks the actual value error.
"""

from __future__ import annotations

import numpy as np

from .dynamics import mopo_uncertainty
from .errors import ConfigError


def head_std_uncertainty(critic, s, a):
    """Population standard deviation across the K heads of one critic."""
    return critic.forward_np(np.atleast_2d(s), np.atleast_2d(a)).std(axis=-1)


def global_uncertainty(ensemble, policy, s, a, gamma, steps, rng):
    """Discounted sum of one-step model-error estimates along a model rollout.

    The rollout starts at (s, a), follows the frozen policy afterwards, and
    advances through a uniformly chosen elite network each step. Rows that
    produce non-finite predictions stop accumulating. Batched over points.
    """
    if steps < 1:
        raise ConfigError(f"rollout steps must be >= 1, got {steps}")
    s = np.atleast_2d(np.asarray(s, dtype=np.float64)).copy()
    a = np.atleast_2d(np.asarray(a, dtype=np.float64)).copy()
    n = s.shape[0]
    total = np.zeros(n)
    alive = np.ones(n, dtype=bool)

    for t in range(steps):
        u = mopo_uncertainty(ensemble, s, a)
        total[alive] += gamma**t * u[alive]
        if t + 1 >= steps:
            break
        means, variances = ensemble.predict_all_raw(
            s, a, indices=[ensemble.elites[i] for i in range(ensemble.n_elite)]
        )
        pick = rng.integers(0, ensemble.n_elite, size=n)
        rows = np.arange(n)
        draw = means[pick, rows] + np.sqrt(variances[pick, rows]) * rng.standard_normal(
            (n, ensemble.out_dim)
        )
        s_next = s + draw[:, :-1]
        alive = alive & np.isfinite(s_next).all(axis=1)
        s = np.where(alive[:, None], s_next, s)
        a, _ = policy.sample_np(s, rng)
    return total


def mc_return(env, policy, s, a, gamma, n_episodes, rng):
    """Average discounted return of rolling the true environment from (s, a)
    with the frozen stochastic policy, over `n_episodes` rollouts per point.
    Rollout length is the environment horizon. Batched over points."""
    if n_episodes < 1:
        raise ConfigError(f"n_episodes must be >= 1, got {n_episodes}")
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    n = s.shape[0]
    s_roll = np.repeat(s, n_episodes, axis=0)
    a_roll = np.repeat(a, n_episodes, axis=0)
    returns = np.zeros(n * n_episodes)
    for t in range(env.spec.horizon):
        s_roll, r = env.step(s_roll, a_roll, rng)
        returns += gamma**t * r
        a_roll, _ = policy.sample_np(s_roll, rng)
    return returns.reshape(n, n_episodes).mean(axis=1)


def collect_points(env, policy, n_points, rng):
    """Draw `n_points` (s, a) pairs from on-policy episodes under the frozen policy."""
    horizon = env.spec.horizon
    n_episodes = max(1, -(-n_points // horizon))
    states = []
    actions = []
    s = env.reset(rng, n=n_episodes)
    for _ in range(horizon):
        a, _ = policy.sample_np(s, rng)
        states.append(s)
        actions.append(a)
        s, _ = env.step(s, a, rng)
    all_s = np.concatenate(states, axis=0)
    all_a = np.concatenate(actions, axis=0)
    pick = rng.permutation(all_s.shape[0])[:n_points]
    return all_s[pick], all_a[pick]


# ---------------------------------------------------------------------------
# rank correlation


def _ranks(x):
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    ranks[order] = np.arange(x.size, dtype=np.float64)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = (i + j) / 2.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Spearman rank correlation with average ranks for ties."""
    rx, ry = _ranks(x), _ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0.0:
        return 0.0
    return float((rx * ry).sum() / denom)


# ---------------------------------------------------------------------------
# record emission

SCATTER_ESTIMATORS = ("head_std", "global")


def scatter_records(env, policy, critics, ensemble, *, n_points, gamma, mc_episodes,
                    rng, aggregation, drop, penalty):
    """Per-point uncertainty estimates versus value-estimation error.

    Returns (columns dict, spearman dict). Column order for CSV emission:
    state dims, action dims, head_std, global, q_estimate, mc_return,
    abs_q_error.
    """
    from .variants import aggregate_np

    s, a = collect_points(env, policy, n_points, rng)
    h_std = head_std_uncertainty(critics[0], s, a)
    g_unc = global_uncertainty(ensemble, policy, s, a, gamma, env.spec.horizon, rng)

    h1 = critics[0].forward_np(s, a)
    h2 = critics[1].forward_np(s, a) if len(critics) > 1 else None
    q_est = aggregate_np(h1, h2, aggregation, drop, penalty)
    mc = mc_return(env, policy, s, a, gamma, mc_episodes, rng)
    abs_err = np.abs(q_est - mc)

    columns = {"s": s, "a": a, "head_std": h_std, "global": g_unc,
               "q_estimate": q_est, "mc_return": mc, "abs_q_error": abs_err}
    corr = {name: spearman(columns[name], abs_err) for name in SCATTER_ESTIMATORS}
    return columns, corr


def model_estimate_records(env, policy, critic, *, n_points, gamma, mc_episodes, rng):
    """Per-point K head estimates plus the Monte-Carlo return (single-network runs)."""
    s, a = collect_points(env, policy, n_points, rng)
    heads = critic.forward_np(s, a)
    mc = mc_return(env, policy, s, a, gamma, mc_episodes, rng)
    return {"s": s, "a": a, "q_heads": heads, "mc_return": mc}


def write_scatter_csv(path, columns):
    s, a = columns["s"], columns["a"]
    headers = (
        [f"s{i}" for i in range(s.shape[1])]
        + [f"a{i}" for i in range(a.shape[1])]
        + ["head_std", "global", "q_estimate", "mc_return", "abs_q_error"]
    )
    rows = np.column_stack([
        s, a, columns["head_std"], columns["global"],
        columns["q_estimate"], columns["mc_return"], columns["abs_q_error"],
    ])
    _write_csv(path, headers, rows)


def write_model_estimates_csv(path, records):
    s, a, heads = records["s"], records["a"], records["q_heads"]
    headers = (
        [f"s{i}" for i in range(s.shape[1])]
        + [f"a{i}" for i in range(a.shape[1])]
        + [f"q_head_{j}" for j in range(heads.shape[1])]
        + ["mc_return"]
    )
    rows = np.column_stack([s, a, heads, records["mc_return"]])
    _write_csv(path, headers, rows)


def _write_csv(path, headers, rows):
    with open(path, "w") as f:
        f.write(",".join(headers) + "\n")
        for row in rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
