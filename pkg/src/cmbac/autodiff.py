"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Small fixed op set, just enough for the losses used in this repo (Gaussian
NLL, Bellman residuals, squashed-Gaussian policy objectives). Everything is
64-bit and single-threaded; graphs are built per loss evaluation and torn
down by the garbage collector.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray.

    Leaves with ``requires_grad=True`` accumulate gradients in ``.grad``
    when ``backward`` is called on a scalar descendant. Ops record their
    parents and a closure returning one gradient array per parent.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def param(data):
    """A trainable leaf tensor."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad, shape):
    """Sum `grad` back down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _live(*nodes):
    return any(n.requires_grad or n._parents for n in nodes)


def _make(data, parents, backward):
    if _live(*parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)


# ---------------------------------------------------------------------------
# ops


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)),
    )


def neg(a):
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data @ b.data
    return _make(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def tanh(a):
    a = _as_tensor(a)
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def exp(a):
    a = _as_tensor(a)
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a):
    a = _as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def square(a):
    a = _as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (g * 2.0 * a.data,))


def softplus(a):
    """log(1 + exp(x)), computed stably."""
    a = _as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _make(out, (a,), lambda g: (g / (1.0 + np.exp(-x)),))


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.data.shape).copy(),)

    return _make(out, (a,), backward)


def minimum(a, b):
    """Elementwise min of paired tensors; gradient follows the smaller side (ties go to `a`)."""
    a, b = _as_tensor(a), _as_tensor(b)
    mask = a.data <= b.data
    return _make(
        np.where(mask, a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * mask, a.data.shape), _unbroadcast(g * ~mask, b.data.shape)),
    )


def clip(a, lo, hi):
    """Clamp values to [lo, hi]; gradient passes inside the bounds (inclusive)."""
    a = _as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def concat(tensors, axis=1):
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), backward)


def gather_cols(a, idx):
    """Row-wise column gather: out[i, j] = a[i, idx[i, j]]. `idx` is constant."""
    a = _as_tensor(a)
    idx = np.asarray(idx)
    out = np.take_along_axis(a.data, idx, axis=1)

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (np.arange(a.data.shape[0])[:, None], idx), g)
        return (ga,)

    return _make(out, (a,), backward)


def std(a, axis=1, keepdims=True):
    """Population standard deviation along `axis` (exact forward, floored denominator in backward)."""
    a = _as_tensor(a)
    mu = a.data.mean(axis=axis, keepdims=True)
    centered = a.data - mu
    sigma = np.sqrt((centered * centered).mean(axis=axis, keepdims=True))
    out = sigma if keepdims else np.squeeze(sigma, axis=axis)
    n = a.data.shape[axis]

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * centered / (n * np.maximum(sigma, 1e-12)),)

    return _make(out, (a,), backward)


def reshape(a, shape):
    a = _as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


# ---------------------------------------------------------------------------
# backward pass


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable grad-requiring leaf's ``.grad``.

    `loss` must be scalar (size 1); raises ValueError otherwise.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward() requires a scalar loss, got shape {loss.data.shape}")

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited and (p.requires_grad or p._parents):
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, piece in zip(node._parents, node._backward(g)):
            if not (parent.requires_grad or parent._parents):
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + piece
            else:
                grads[key] = piece


def zero_grad(params):
    for p in params:
        p.grad = None
