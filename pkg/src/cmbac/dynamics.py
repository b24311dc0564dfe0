"""Probabilistic dynamics ensemble, model combinations, and branched rollouts.

The ensemble's networks each predict a diagonal Gaussian over the
(state delta, reward) vector in normalized units. Combinations of elite
networks act as individual models: sampling a combination means picking one
member uniformly and sampling its Gaussian. Branched rollouts advance a
trajectory through one sampled combination while recording the next state
and reward every combination would have produced at the same (s, a).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError
from .nets import Adam, Mlp

LOG_2PI = math.log(2.0 * math.pi)


class Normalizer:
    """Per-dimension affine normalization with a floored std."""

    def __init__(self, dim):
        self.mean = np.zeros(dim)
        self.std = np.ones(dim)

    def fit(self, x):
        self.mean = x.mean(axis=0)
        self.std = np.maximum(x.std(axis=0), 1e-8)

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, x):
        return x * self.std + self.mean


class GaussianDynamicsNet:
    """One ensemble member: MLP with mean and log-variance heads plus trainable
    soft clamps keeping the predicted variances inside exp([lower, upper])."""

    def __init__(self, in_dim, out_dim, hidden, rng):
        self.out_dim = out_dim
        self.mlp = Mlp(in_dim, hidden, [out_dim, out_dim], rng, activation="relu")
        self.max_logvar = ad.param(np.full(out_dim, 0.5))
        self.min_logvar = ad.param(np.full(out_dim, -10.0))

    def params(self):
        return self.mlp.params() + [self.max_logvar, self.min_logvar]

    def named_params(self, prefix=""):
        return self.mlp.named_params(prefix) + [
            (f"{prefix}max_logvar", self.max_logvar),
            (f"{prefix}min_logvar", self.min_logvar),
        ]

    def forward(self, x):
        mean, logvar_raw = self.mlp.forward(x)
        upper, lower = self.max_logvar, self.min_logvar
        logvar = ad.sub(upper, ad.softplus(ad.sub(upper, logvar_raw)))
        logvar = ad.add(lower, ad.softplus(ad.sub(logvar, lower)))
        return mean, logvar

    def forward_np(self, x):
        mean, logvar_raw = self.mlp.forward_np(x)
        upper, lower = self.max_logvar.data, self.min_logvar.data
        logvar = upper - _softplus_np(upper - logvar_raw)
        logvar = lower + _softplus_np(logvar - lower)
        return mean, logvar


def _softplus_np(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def gaussian_nll(net, inputs_n, targets_n):
    """Mean per-sample Gaussian negative log-likelihood, summed over dimensions.

    Inputs and targets are already normalized. Returns a graph node; the
    variance-clamp penalty is *not* included (see `bound_penalty`).
    """
    mean, logvar = net.forward(inputs_n)
    diff = ad.sub(Tensor(targets_n), mean)
    inv_var = ad.exp(ad.neg(logvar))
    per_dim = ad.add(ad.add(ad.mul(ad.square(diff), inv_var), logvar), Tensor(LOG_2PI))
    return ad.mul(ad.tmean(ad.tsum(per_dim, axis=1)), Tensor(0.5))


def gaussian_nll_np(mean, logvar, targets_n):
    """Tape-free NLL of precomputed (mean, logvar) against normalized targets."""
    per_dim = (targets_n - mean) ** 2 * np.exp(-logvar) + logvar + LOG_2PI
    return 0.5 * per_dim.sum(axis=1).mean()


def bound_penalty(net, coeff=0.01):
    """Regularizer pulling the trainable log-variance clamps together."""
    spread = ad.sub(ad.tsum(net.max_logvar), ad.tsum(net.min_logvar))
    return ad.mul(spread, Tensor(coeff))


class GaussianEnsemble:
    """N probabilistic networks with an elite subset chosen by holdout NLL."""

    def __init__(self, state_dim, action_dim, n_total, n_elite, hidden, lr, rng):
        if not 1 <= n_elite <= n_total:
            raise ConfigError(f"elite count {n_elite} must be in [1, {n_total}]")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.out_dim = state_dim + 1
        self.n_total = n_total
        self.n_elite = n_elite
        in_dim = state_dim + action_dim
        self.nets = [GaussianDynamicsNet(in_dim, self.out_dim, hidden, rng) for _ in range(n_total)]
        self.optimizers = [Adam(net.params(), lr=lr) for net in self.nets]
        self.input_norm = Normalizer(in_dim)
        self.target_norm = Normalizer(self.out_dim)
        self.elites = list(range(n_elite))
        self.trained = False

    # ------------------------------------------------------------------
    # prediction

    def _inputs(self, s, a):
        return self.input_norm.normalize(np.concatenate([s, a], axis=-1))

    def predict_raw(self, net_idx, s, a):
        """Denormalized (mean of (delta, r), diagonal variance) for one network."""
        mean_n, logvar_n = self.nets[net_idx].forward_np(self._inputs(s, a))
        t_std, t_mean = self.target_norm.std, self.target_norm.mean
        return mean_n * t_std + t_mean, np.exp(logvar_n) * t_std**2

    def predict_all_raw(self, s, a, indices=None):
        """Stacked denormalized means/variances for several networks: (n_nets, B, out)."""
        indices = range(self.n_total) if indices is None else indices
        x = self._inputs(s, a)
        t_std, t_mean = self.target_norm.std, self.target_norm.mean
        means, variances = [], []
        for i in indices:
            mean_n, logvar_n = self.nets[i].forward_np(x)
            means.append(mean_n * t_std + t_mean)
            variances.append(np.exp(logvar_n) * t_std**2)
        return np.stack(means), np.stack(variances)

    # ------------------------------------------------------------------
    # training

    def train(self, env_buffer, *, steps, batch_size, holdout_fraction, rng):
        """One training call: refresh normalization, bootstrap-train every
        network, and re-pick elites by holdout NLL. Returns summary stats."""
        s, a, r, s_next, _ = env_buffer.all_transitions()
        inputs = np.concatenate([s, a], axis=1)
        targets = np.concatenate([s_next - s, r[:, None]], axis=1)

        self.input_norm.fit(inputs)
        self.target_norm.fit(targets)
        inputs_n = self.input_norm.normalize(inputs)
        targets_n = self.target_norm.normalize(targets)

        n = inputs.shape[0]
        n_holdout = max(1, int(round(n * holdout_fraction)))
        perm = rng.permutation(n)
        holdout_idx, train_idx = perm[:n_holdout], perm[n_holdout:]
        if train_idx.size == 0:
            train_idx = holdout_idx

        for net, opt in zip(self.nets, self.optimizers):
            boot = train_idx[rng.integers(0, train_idx.size, size=train_idx.size)]
            x_boot, t_boot = inputs_n[boot], targets_n[boot]
            for _ in range(steps):
                pick = rng.integers(0, boot.size, size=min(batch_size, boot.size))
                loss = ad.add(gaussian_nll(net, x_boot[pick], t_boot[pick]), bound_penalty(net))
                if not np.isfinite(loss.data):
                    raise FloatingPointError("non-finite dynamics model loss")
                opt.zero_grad()
                ad.backward(loss)
                opt.step()

        holdout_nll = []
        for net in self.nets:
            mean, logvar = net.forward_np(inputs_n[holdout_idx])
            holdout_nll.append(gaussian_nll_np(mean, logvar, targets_n[holdout_idx]))
        ranked = sorted(range(self.n_total), key=lambda i: (holdout_nll[i], i))
        self.elites = ranked[: self.n_elite]
        self.trained = True
        return {
            "holdout_nll": holdout_nll,
            "elite_nll_mean": float(np.mean([holdout_nll[i] for i in self.elites])),
        }

    # ------------------------------------------------------------------
    # checkpoint plumbing

    def named_params(self):
        out = []
        for i, net in enumerate(self.nets):
            out += net.named_params(f"ens{i}.")
        return out

    def state_arrays(self):
        out = [(name, p.data) for name, p in self.named_params()]
        for i, opt in enumerate(self.optimizers):
            out += opt.state_arrays(f"ens{i}.adam.")
        out += [
            ("ens.input_norm.mean", self.input_norm.mean),
            ("ens.input_norm.std", self.input_norm.std),
            ("ens.target_norm.mean", self.target_norm.mean),
            ("ens.target_norm.std", self.target_norm.std),
        ]
        return out

    def load_state_arrays(self, arrays, meta):
        for name, p in self.named_params():
            p.data[...] = arrays[name]
        for i, opt in enumerate(self.optimizers):
            opt.load_state_arrays(f"ens{i}.adam.", arrays)
            opt.t = meta["adam_t"][i]
        self.input_norm.mean[...] = arrays["ens.input_norm.mean"]
        self.input_norm.std[...] = arrays["ens.input_norm.std"]
        self.target_norm.mean[...] = arrays["ens.target_norm.mean"]
        self.target_norm.std[...] = arrays["ens.target_norm.std"]
        self.elites = list(meta["elites"])
        self.trained = meta["trained"]

    def state_meta(self):
        return {
            "adam_t": [opt.t for opt in self.optimizers],
            "elites": list(self.elites),
            "trained": self.trained,
        }


# ---------------------------------------------------------------------------
# model combinations


def enumerate_combinations(n_elite, m):
    """All size-`m` subsets of range(n_elite) in lexicographic order."""
    if not 1 <= m <= n_elite:
        raise ConfigError(f"networks per model must be in [1, {n_elite}], got {m}")
    return [tuple(c) for c in itertools.combinations(range(n_elite), m)]


class ModelSet:
    """The K = C(n_elite, m) combinations of elite slots, in a fixed order.

    Combinations index elite *slots* (rank positions in the elite list), so
    the head-to-combination binding stays fixed across retraining even as
    elite identities change.
    """

    def __init__(self, n_elite, m):
        self.n_elite = n_elite
        self.m = m
        self.combinations = enumerate_combinations(n_elite, m)
        self.k = len(self.combinations)


def sample_model_j(ensemble, combination, s, a, rng):
    """Sample one transition from the mixture model defined by `combination`.

    Picks a member network uniformly, then samples its Gaussian. `combination`
    holds elite-slot indices; `s`, `a` are single vectors.
    """
    slot = combination[rng.integers(0, len(combination))]
    net_idx = ensemble.elites[slot]
    mean, var = ensemble.predict_raw(net_idx, s[None, :], a[None, :])
    draw = mean[0] + np.sqrt(var[0]) * rng.standard_normal(ensemble.out_dim)
    return s + draw[:-1], draw[-1]


def branched_rollout(ensemble, model_set, policy, env_buffer, model_buffer,
                     horizon, n_rollouts, rng):
    """Generate `n_rollouts` short rollouts and append them to the model buffer.

    Start states are drawn uniformly from the environment buffer. Each step
    advances every live rollout through one uniformly chosen combination
    (then one uniformly chosen member), while recording the next state and
    reward every combination produces at that (s, a). Rollouts hitting a
    non-finite model output are truncated. Returns counts/statistics.

    Draw order per step (one shared stream): policy actions, advance
    combination ids, advance member picks, advance noise, then for each
    combination j in order: member picks, noise.
    """
    k = model_set.k
    m = model_set.m
    ds, out_dim = ensemble.state_dim, ensemble.out_dim
    combos = np.array(model_set.combinations)

    s = env_buffer.sample_states(n_rollouts, rng)
    alive = np.ones(n_rollouts, dtype=bool)
    appended = 0
    reward_sum = 0.0
    u_sum = 0.0
    branch_spread_sum = 0.0

    for _ in range(horizon):
        if not alive.any():
            break
        s_live = s[alive]
        n = s_live.shape[0]

        a_live, _ = policy.sample_np(s_live, rng)

        means, variances = ensemble.predict_all_raw(
            s_live, a_live, indices=[ensemble.elites[i] for i in range(ensemble.n_elite)]
        )
        u_live = mopo_uncertainty(ensemble, s_live, a_live)

        j_star = rng.integers(0, k, size=n)
        member = rng.integers(0, m, size=n)
        slot = combos[j_star, member]
        noise = rng.standard_normal((n, out_dim))
        rows = np.arange(n)
        draw = means[slot, rows] + np.sqrt(variances[slot, rows]) * noise
        s_next = s_live + draw[:, :-1]
        r = draw[:, -1]

        branch_s = np.empty((n, k, ds))
        branch_r = np.empty((n, k))
        for j in range(k):
            member_j = rng.integers(0, m, size=n)
            slot_j = combos[j, member_j]
            noise_j = rng.standard_normal((n, out_dim))
            draw_j = means[slot_j, rows] + np.sqrt(variances[slot_j, rows]) * noise_j
            branch_s[:, j] = s_live + draw_j[:, :-1]
            branch_r[:, j] = draw_j[:, -1]

        finite = (
            np.isfinite(s_next).all(axis=1)
            & np.isfinite(r)
            & np.isfinite(branch_s).all(axis=(1, 2))
            & np.isfinite(branch_r).all(axis=1)
        )
        if finite.any():
            model_buffer.add_batch(
                s_live[finite],
                a_live[finite],
                r[finite],
                s_next[finite],
                np.zeros(int(finite.sum()), dtype=bool),
                branch_s[finite],
                branch_r[finite],
                u_live[finite],
            )
            appended += int(finite.sum())
            reward_sum += float(r[finite].sum())
            u_sum += float(u_live[finite].sum())
            branch_spread_sum += float(branch_r[finite].std(axis=1).sum())

        next_alive = alive.copy()
        next_alive[alive] = finite
        s = s.copy()
        s[alive] = np.where(finite[:, None], s_next, s_live)
        alive = next_alive

    return {
        "appended": appended,
        "reward_mean": reward_sum / appended if appended else 0.0,
        "u_mean": u_sum / appended if appended else 0.0,
        "branch_reward_std": branch_spread_sum / appended if appended else 0.0,
    }


def mopo_uncertainty(ensemble, s, a):
    """Max over all networks of the Frobenius norm of the diagonal covariance."""
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    _, variances = ensemble.predict_all_raw(s, a)
    return np.sqrt((variances**2).sum(axis=2)).max(axis=0)


def horizon_schedule(epoch, x, y, a, b):
    """Thresholded linear ramp from x to y over epochs [a, b], floored to an int."""
    if a >= b:
        raise ConfigError(f"schedule epochs must satisfy a < b, got a={a}, b={b}")
    value = min(max(x + (epoch - a) / (b - a) * (y - x), x), y)
    return int(math.floor(value))
