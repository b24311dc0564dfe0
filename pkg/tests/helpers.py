"""Shared test oracles: central finite differences and error metrics."""

import numpy as np


def fd_gradients(loss_fn, params, h=1e-5):
    """Central-difference gradient of a scalar `loss_fn()` in each param.

    `loss_fn` must rebuild its computation from the params' current data on
    every call.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gf[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric, floor=1e-6):
    """Max over coordinates of |a - n| / max(|a|, |n|, floor)."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def collect_grads(params):
    return [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
