"""Ring replay buffers for real and imagined transitions."""

from __future__ import annotations

import numpy as np


class EnvBuffer:
    """FIFO ring buffer of real-environment transitions with uniform sampling."""

    def __init__(self, capacity, state_dim, action_dim):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s_next = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s_next, done):
        i = self.ptr
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.done[i] = done
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n, rng):
        return rng.integers(0, self.size, size=n)

    def sample_states(self, n, rng):
        return self.s[self.sample_indices(n, rng)]

    def all_transitions(self):
        n = self.size
        return self.s[:n], self.a[:n], self.r[:n], self.s_next[:n], self.done[:n]

    def state_arrays(self, prefix):
        n = self.size
        return [
            (f"{prefix}s", self.s[:n]),
            (f"{prefix}a", self.a[:n]),
            (f"{prefix}r", self.r[:n]),
            (f"{prefix}s_next", self.s_next[:n]),
            (f"{prefix}done", self.done[:n].astype(np.float64)),
        ]

    def load_state_arrays(self, prefix, arrays, ptr):
        n = arrays[f"{prefix}s"].shape[0]
        self.s[:n] = arrays[f"{prefix}s"]
        self.a[:n] = arrays[f"{prefix}a"]
        self.r[:n] = arrays[f"{prefix}r"]
        self.s_next[:n] = arrays[f"{prefix}s_next"]
        self.done[:n] = arrays[f"{prefix}done"] > 0.5
        self.size = n
        self.ptr = ptr


class ModelBuffer:
    """FIFO ring buffer of imagined transitions carrying per-combination branches.

    Each entry keeps, besides the rollout transition itself, the next state
    and reward sampled from every one of the K model combinations at that
    (s, a), plus the one-step ensemble disagreement `u` used for penalty
    variants. The buffer is bound to a fixed K; re-binding with a different
    K clears it.
    """

    def __init__(self, capacity, state_dim, action_dim, k):
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.k = k
        self._alloc()

    def _alloc(self):
        c = self.capacity
        self.s = np.zeros((c, self.state_dim))
        self.a = np.zeros((c, self.action_dim))
        self.r = np.zeros(c)
        self.s_next = np.zeros((c, self.state_dim))
        self.done = np.zeros(c, dtype=bool)
        self.branch_s = np.zeros((c, self.k, self.state_dim))
        self.branch_r = np.zeros((c, self.k))
        self.u = np.zeros(c)
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def ensure_k(self, k):
        if k != self.k:
            self.k = k
            self._alloc()

    def add_batch(self, s, a, r, s_next, done, branch_s, branch_r, u):
        n = s.shape[0]
        idx = (self.ptr + np.arange(n)) % self.capacity
        self.s[idx] = s
        self.a[idx] = a
        self.r[idx] = r
        self.s_next[idx] = s_next
        self.done[idx] = done
        self.branch_s[idx] = branch_s
        self.branch_r[idx] = branch_r
        self.u[idx] = u
        self.ptr = int((self.ptr + n) % self.capacity)
        self.size = min(self.size + n, self.capacity)

    def sample_indices(self, n, rng):
        return rng.integers(0, self.size, size=n)

    def gather(self, idx):
        return (
            self.s[idx],
            self.a[idx],
            self.r[idx],
            self.s_next[idx],
            self.done[idx],
            self.branch_s[idx],
            self.branch_r[idx],
            self.u[idx],
        )

    def state_arrays(self, prefix):
        n = self.size
        return [
            (f"{prefix}s", self.s[:n]),
            (f"{prefix}a", self.a[:n]),
            (f"{prefix}r", self.r[:n]),
            (f"{prefix}s_next", self.s_next[:n]),
            (f"{prefix}done", self.done[:n].astype(np.float64)),
            (f"{prefix}branch_s", self.branch_s[:n]),
            (f"{prefix}branch_r", self.branch_r[:n]),
            (f"{prefix}u", self.u[:n]),
        ]

    def load_state_arrays(self, prefix, arrays, ptr):
        n = arrays[f"{prefix}s"].shape[0]
        self.s[:n] = arrays[f"{prefix}s"]
        self.a[:n] = arrays[f"{prefix}a"]
        self.r[:n] = arrays[f"{prefix}r"]
        self.s_next[:n] = arrays[f"{prefix}s_next"]
        self.done[:n] = arrays[f"{prefix}done"] > 0.5
        self.branch_s[:n] = arrays[f"{prefix}branch_s"]
        self.branch_r[:n] = arrays[f"{prefix}branch_r"]
        self.u[:n] = arrays[f"{prefix}u"]
        self.size = n
        self.ptr = ptr
