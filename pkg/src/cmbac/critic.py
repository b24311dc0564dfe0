"""Multi-head Q-networks, per-model Bellman targets, and soft target updates."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nets import Mlp


class MultiHeadQ:
    """Shared trunk with K linear heads; head j is bound to model combination j.

    The heads are realized as one width-K linear output layer: column j is
    an independent affine map of the trunk features, i.e. head j.
    """

    def __init__(self, state_dim, action_dim, hidden, k, rng):
        self.k = k
        self.mlp = Mlp(state_dim + action_dim, hidden, [k], rng, activation="relu")

    def forward(self, s, a):
        """(B, K) graph node of all head values; `s`, `a` may be arrays or nodes."""
        s = s if isinstance(s, Tensor) else Tensor(s)
        a = a if isinstance(a, Tensor) else Tensor(a)
        return self.mlp.forward(ad.concat([s, a], axis=1))[0]

    def forward_np(self, s, a):
        return self.mlp.forward_np(np.concatenate([s, a], axis=-1))[0]

    def forward_np_x(self, x):
        """Tape-free forward on a pre-concatenated (state, action) input."""
        return self.mlp.forward_np(x)[0]

    def params(self):
        return self.mlp.params()

    def named_params(self, prefix=""):
        return self.mlp.named_params(prefix)

    def clone(self):
        twin = MultiHeadQ.__new__(MultiHeadQ)
        twin.k = self.k
        twin.mlp = self.mlp.clone()
        return twin


def polyak_update(target, online, tau):
    """In-place exponential moving average: target <- (1 - tau) * target + tau * online."""
    for t, o in zip(target.params(), online.params()):
        t.data *= 1.0 - tau
        t.data += tau * o.data


def head_targets(branch_s, rewards, policy, target_nets, alpha, gamma, rng):
    """Per-head bootstrap targets y_j, shape (B, K).

    For each head j: draw a'_j from the policy at that head's branch next
    state s'_j, bootstrap from the minimum over the target networks' head j,
    and subtract the entropy term. `rewards` is (B, K), already holding
    whatever reward rule the variant uses. Everything here is tape-free;
    targets are constants to the critic loss.

    Determinism contract: exactly one policy sample call on the flattened
    (B*K) batch, consuming one (B*K, action_dim) normal draw.
    """
    b, k, ds = branch_s.shape
    flat_s = branch_s.reshape(b * k, ds)
    a_flat, logp_flat = policy.sample_np(flat_s, rng)

    x = np.concatenate([flat_s, a_flat], axis=1)
    mins = None
    for net in target_nets:
        heads = net.forward_np_x(x).reshape(b, k, k)
        q_j = np.einsum("bjj->bj", heads)
        mins = q_j if mins is None else np.minimum(mins, q_j)

    logp = logp_flat.reshape(b, k)
    return rewards + gamma * (mins - alpha * logp)


def shared_mean_targets(s_next, rewards, policy, target_nets, gamma, rng, k):
    """Single target broadcast to all heads: y = r + gamma * min over nets of
    the head average at (s', a'), a' ~ pi(s'). No entropy term."""
    b = s_next.shape[0]
    a_next, _ = policy.sample_np(s_next, rng)
    mins = None
    for net in target_nets:
        mean_q = net.forward_np(s_next, a_next).mean(axis=1)
        mins = mean_q if mins is None else np.minimum(mins, mean_q)
    y = rewards + gamma * mins
    return np.repeat(y[:, None], k, axis=1)


def critic_loss(net, s, a, y):
    """Bellman residual: mean over batch and heads of (1/2)(Q_j(s,a) - y_j)^2."""
    q = net.forward(s, a)
    return ad.mul(ad.tmean(ad.square(ad.sub(q, Tensor(y)))), Tensor(0.5))
