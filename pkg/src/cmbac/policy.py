"""Tanh-squashed Gaussian policy, conservative head aggregation, and the
policy/temperature objectives."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError
from .nets import Adam, Mlp

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)


class SquashedGaussianPolicy:
    """Gaussian-in-pre-squash-space policy producing actions inside the box.

    `sample_np` is the fast numpy path used for environment interaction,
    rollouts and critic targets; `rsample` builds a reparameterized graph
    for the actor objective. Both compute identical values from the same
    noise.
    """

    def __init__(self, state_dim, action_dim, hidden, rng, action_low, action_high):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.mlp = Mlp(state_dim, hidden, [action_dim, action_dim], rng, activation="relu")
        low = np.asarray(action_low, dtype=np.float64)
        high = np.asarray(action_high, dtype=np.float64)
        self.center = (high + low) / 2.0
        self.halfspan = (high - low) / 2.0
        self._log_halfspan_sum = float(np.log(self.halfspan).sum())

    def sample_np(self, s, rng):
        """Stochastic action and its log-density; shapes (B, dA) and (B,)."""
        mean, log_std_raw = self.mlp.forward_np(s)
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        eps = rng.standard_normal(mean.shape)
        u = mean + np.exp(log_std) * eps
        action = self.center + self.halfspan * np.tanh(u)
        logp = self._logp_np(eps, log_std, u)
        return action, logp

    def _logp_np(self, eps, log_std, u):
        gauss = -0.5 * eps**2 - log_std - 0.5 * LOG_2PI
        squash = 2.0 * LOG_2 - 2.0 * u - 2.0 * _softplus_np(-2.0 * u)
        return (gauss - squash).sum(axis=-1) - self._log_halfspan_sum

    def rsample(self, s, eps):
        """Graph-building reparameterized sample for fixed noise `eps`.

        Returns (action node (B, dA), log-density node (B, 1)).
        """
        mean, log_std_raw = self.mlp.forward(Tensor(s))
        log_std = ad.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        u = ad.add(mean, ad.mul(ad.exp(log_std), Tensor(eps)))
        action = ad.add(ad.mul(ad.tanh(u), Tensor(self.halfspan)), Tensor(self.center))

        gauss = ad.sub(ad.mul(ad.square(Tensor(eps)), Tensor(-0.5)), log_std)
        two_u = ad.mul(u, Tensor(2.0))
        squash = ad.sub(Tensor(2.0 * LOG_2), ad.add(two_u, ad.mul(ad.softplus(ad.neg(two_u)), Tensor(2.0))))
        per_dim = ad.sub(ad.sub(gauss, Tensor(0.5 * LOG_2PI)), squash)
        logp = ad.sub(ad.tsum(per_dim, axis=1, keepdims=True), Tensor(self._log_halfspan_sum))
        return action, logp

    def deterministic_np(self, s):
        mean, _ = self.mlp.forward_np(s)
        return self.center + self.halfspan * np.tanh(mean)

    def params(self):
        return self.mlp.params()

    def named_params(self, prefix=""):
        return self.mlp.named_params(prefix)


def _softplus_np(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


class Temperature:
    """Learnable entropy temperature with a fixed-value mode."""

    def __init__(self, *, auto, initial, target_entropy, lr):
        self.auto = auto
        self.target_entropy = target_entropy
        self.log_alpha = ad.param(np.array([math.log(max(initial, 1e-12))]))
        self.fixed_value = initial
        self.optimizer = Adam([self.log_alpha], lr=lr)

    @property
    def value(self):
        if not self.auto:
            return self.fixed_value
        return float(np.exp(self.log_alpha.data[0]))

    def update(self, logp):
        """One dual-ascent step steering entropy toward the target; no-op when fixed."""
        if not self.auto:
            return 0.0
        grad = -float(np.mean(logp + self.target_entropy))
        self.log_alpha.grad = np.array([grad])
        self.optimizer.step()
        self.log_alpha.grad = None
        return grad


# ---------------------------------------------------------------------------
# head aggregation


def conservative_q(head_values_1, head_values_2, drop):
    """Average of the K-drop smallest head values per network, then the
    two-network minimum. `head_values_*` has heads on the last axis;
    `head_values_2=None` runs the single-network form."""
    agg1 = _bottom_mean(head_values_1, drop)
    if head_values_2 is None:
        return agg1
    return np.minimum(agg1, _bottom_mean(head_values_2, drop))


def _bottom_mean(values, drop):
    values = np.asarray(values, dtype=np.float64)
    k = values.shape[-1]
    if not 0 <= drop <= k - 1:
        raise ConfigError(f"drop count must be in [0, {k - 1}], got {drop}")
    kept = np.sort(values, axis=-1, kind="stable")[..., : k - drop]
    return kept.mean(axis=-1)


def aggregate_heads_node(head_nodes, rule, drop, penalty):
    """Tape-side aggregation of per-network (B, K) head nodes into (B, 1).

    `rule` is one of bottom_k / mean / penalty / min_all / redq; `drop` and
    `penalty` are the conservatism knobs. Selection indices are computed
    from values and treated as constants, the standard subgradient of
    sort-based selection.
    """
    if rule in ("bottom_k", "redq"):
        per_net = [_bottom_mean_node(h, drop) for h in head_nodes]
    elif rule == "mean":
        per_net = [ad.tmean(h, axis=1, keepdims=True) for h in head_nodes]
    elif rule == "penalty":
        per_net = [
            ad.sub(ad.tmean(h, axis=1, keepdims=True), ad.mul(ad.std(h, axis=1, keepdims=True), Tensor(penalty)))
            for h in head_nodes
        ]
    elif rule == "min_all":
        per_net = [ad.gather_cols(h, np.argsort(h.data, axis=1, kind="stable")[:, :1]) for h in head_nodes]
    else:
        raise ConfigError(f"unknown aggregation rule {rule!r}")

    if len(per_net) == 1:
        return per_net[0]
    if rule == "redq":
        return ad.mul(ad.add(per_net[0], per_net[1]), Tensor(0.5))
    return ad.minimum(per_net[0], per_net[1])


def _bottom_mean_node(heads, drop):
    k = heads.data.shape[1]
    if not 0 <= drop <= k - 1:
        raise ConfigError(f"drop count must be in [0, {k - 1}], got {drop}")
    if drop == 0:
        return ad.tmean(heads, axis=1, keepdims=True)
    idx = np.argsort(heads.data, axis=1, kind="stable")[:, : k - drop]
    return ad.tmean(ad.gather_cols(heads, idx), axis=1, keepdims=True)


def actor_loss(policy, states, critics, alpha, rule, drop, penalty, eps):
    """Reparameterized surrogate of the KL policy objective:
    mean over states of (alpha * log pi(a|s) - Qhat(s, a)), a = rsample.

    Returns (loss node, log-density values) — the latter feeds the
    temperature update.
    """
    action, logp = policy.rsample(states, eps)
    head_nodes = [c.forward(Tensor(states), action) for c in critics]
    q_hat = aggregate_heads_node(head_nodes, rule, drop, penalty)
    loss = ad.tmean(ad.sub(ad.mul(logp, Tensor(alpha)), q_hat))
    return loss, logp.data.reshape(-1).copy()
