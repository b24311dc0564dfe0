"""Multilayer perceptrons, the Adam optimizer, and flat binary parameter snapshots."""

from __future__ import annotations

import struct

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

_ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}
_ACTIVATIONS_NP = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
}


def _init_layer(in_dim, out_dim, rng):
    # uniform in +/- 1/sqrt(fan_in); keeps initial outputs near zero
    bound = 1.0 / np.sqrt(in_dim)
    w = ad.param(rng.uniform(-bound, bound, size=(in_dim, out_dim)))
    b = ad.param(rng.uniform(-bound, bound, size=(out_dim,)))
    return w, b


class Mlp:
    """Dense trunk with one or more linear output heads off the last hidden layer.

    `forward` builds a graph for training; `forward_np` is the tape-free
    path used for targets, rollouts and evaluation. Both produce identical
    float64 values for identical inputs.
    """

    def __init__(self, in_dim, hidden, head_dims, rng, activation="relu"):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.hidden_dims = list(hidden)
        self.head_dims = list(head_dims)
        self.activation = activation
        self.layers = []
        last = in_dim
        for h in hidden:
            self.layers.append(_init_layer(last, h, rng))
            last = h
        self.heads = [_init_layer(last, d, rng) for d in head_dims]

    def forward(self, x):
        act = _ACTIVATIONS[self.activation]
        if not isinstance(x, Tensor):
            x = Tensor(x)
        h = x
        for w, b in self.layers:
            h = act(ad.add(ad.matmul(h, w), b))
        return [ad.add(ad.matmul(h, w), b) for w, b in self.heads]

    def forward_np(self, x):
        act = _ACTIVATIONS_NP[self.activation]
        h = np.asarray(x, dtype=np.float64)
        for w, b in self.layers:
            h = act(h @ w.data + b.data)
        return [h @ w.data + b.data for w, b in self.heads]

    def params(self):
        out = []
        for w, b in self.layers:
            out += [w, b]
        for w, b in self.heads:
            out += [w, b]
        return out

    def named_params(self, prefix=""):
        out = []
        for i, (w, b) in enumerate(self.layers):
            out += [(f"{prefix}layer{i}.w", w), (f"{prefix}layer{i}.b", b)]
        for i, (w, b) in enumerate(self.heads):
            out += [(f"{prefix}head{i}.w", w), (f"{prefix}head{i}.b", b)]
        return out

    def copy_from(self, other):
        """Hard-copy parameter values from a same-shaped Mlp."""
        for dst, src in zip(self.params(), other.params()):
            dst.data[...] = src.data

    def clone(self):
        twin = Mlp.__new__(Mlp)
        twin.in_dim = self.in_dim
        twin.hidden_dims = list(self.hidden_dims)
        twin.head_dims = list(self.head_dims)
        twin.activation = self.activation
        twin.layers = [(ad.param(w.data.copy()), ad.param(b.data.copy())) for w, b in self.layers]
        twin.heads = [(ad.param(w.data.copy()), ad.param(b.data.copy())) for w, b in self.heads]
        return twin


class Adam:
    """Adam with bias correction over a fixed parameter list."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        ad.zero_grad(self.params)

    def state_arrays(self, prefix):
        out = []
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out += [(f"{prefix}m{i}", m), (f"{prefix}v{i}", v)]
        return out

    def load_state_arrays(self, prefix, arrays):
        for i in range(len(self.m)):
            self.m[i][...] = arrays[f"{prefix}m{i}"]
            self.v[i][...] = arrays[f"{prefix}v{i}"]


# ---------------------------------------------------------------------------
# flat binary snapshots: magic, count, shape table (named), then row-major
# float64 payloads in table order.

_MAGIC = b"CMB1"


class SnapshotError(RuntimeError):
    """Raised when a parameter snapshot file is malformed."""


def dumps_arrays(named_arrays):
    """Encode an ordered mapping of name -> float64 ndarray as bytes."""
    items = list(named_arrays.items() if isinstance(named_arrays, dict) else named_arrays)
    chunks = [_MAGIC, struct.pack("<I", len(items))]
    for name, arr in items:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        if arr.ndim:
            chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in items:
        chunks.append(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return b"".join(chunks)


def save_arrays(path, named_arrays):
    with open(path, "wb") as f:
        f.write(dumps_arrays(named_arrays))


def load_arrays(path):
    """Read a snapshot written by `save_arrays`; returns dict name -> ndarray."""
    with open(path, "rb") as f:
        blob = f.read()
    return loads_arrays(blob)


def loads_arrays(blob):
    if blob[:4] != _MAGIC:
        raise SnapshotError("bad magic: not a parameter snapshot")
    off = 4
    try:
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        table = []
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", blob, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, off) if ndim else ()
            off += 4 * ndim
            table.append((name, shape))
        out = {}
        for name, shape in table:
            n = int(np.prod(shape)) if shape else 1
            end = off + 8 * n
            if end > len(blob):
                raise SnapshotError("truncated snapshot payload")
            out[name] = np.frombuffer(blob[off:end], dtype="<f8").reshape(shape).copy()
            off = end
        if off != len(blob):
            raise SnapshotError("trailing bytes after snapshot payload")
    except struct.error as e:
        raise SnapshotError(f"corrupt snapshot header: {e}") from e
    return out
