"""Desk-scale continuous-control environments.

All environments are purely functional: `step(s, a, rng)` has no hidden
state and accepts batched `(n, dim)` arrays as well as single `(dim,)`
vectors. Episode-time accounting (fixed horizons, done flags) lives in the
caller. Gaussian action noise wraps a base environment; its rng parameter
is the only source of stochastic dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int


class Point2DEnv:
    """Point mass on the [-2, 2]^2 box walking toward the origin.

    Dynamics: s' = clip(s + a, -2, 2).
    Reward:   scale * exp(-||s' - goal||^2 / bandwidth), maximal exactly at
    the goal. Fixed horizon, no early termination.
    """

    def __init__(self, scale=0.05, bandwidth=5.0, horizon=50):
        if scale <= 0 or bandwidth <= 0:
            raise ConfigError("point2d reward scale and bandwidth must be positive")
        self.scale = scale
        self.bandwidth = bandwidth
        self.goal = np.zeros(2)
        self.spec = EnvSpec(
            name="point2d",
            state_dim=2,
            action_dim=2,
            action_low=np.full(2, -1.0),
            action_high=np.full(2, 1.0),
            horizon=horizon,
        )

    def reset(self, rng, n=None):
        shape = (2,) if n is None else (n, 2)
        return rng.uniform(-2.0, 2.0, size=shape)

    def step(self, s, a, rng=None):
        s_next = np.clip(s + a, -2.0, 2.0)
        d2 = ((s_next - self.goal) ** 2).sum(axis=-1)
        return s_next, self.scale * np.exp(-d2 / self.bandwidth)

    def reward(self, s, a):
        return self.step(s, a)[1]

    def terminal(self, s):
        return np.zeros(np.asarray(s).shape[:-1], dtype=bool)


class PendulumEnv:
    """Torque-limited pendulum swing-up, one Euler step per action.

    State is (cos th, sin th, thdot); reward is the negative quadratic cost
    -(th^2 + 0.1 thdot^2 + 0.001 a^2) at the pre-step state, zero at the
    upright equilibrium. Angular velocity is clamped so the integrator
    stays bounded for any action sequence.
    """

    dt = 0.05
    gravity = 10.0
    mass = 1.0
    length = 1.0
    max_speed = 8.0

    def __init__(self, horizon=200):
        self.spec = EnvSpec(
            name="pendulum",
            state_dim=3,
            action_dim=1,
            action_low=np.full(1, -2.0),
            action_high=np.full(1, 2.0),
            horizon=horizon,
        )

    def reset(self, rng, n=None):
        shape = () if n is None else (n,)
        th = rng.uniform(-np.pi, np.pi, size=shape)
        thdot = rng.uniform(-1.0, 1.0, size=shape)
        return np.stack([np.cos(th), np.sin(th), thdot], axis=-1)

    def step(self, s, a, rng=None):
        s = np.asarray(s, dtype=np.float64)
        cos_th, sin_th, thdot = s[..., 0], s[..., 1], s[..., 2]
        torque = np.asarray(a, dtype=np.float64)[..., 0]
        th = np.arctan2(sin_th, cos_th)

        r = self.reward(s, a)

        g, m, l = self.gravity, self.mass, self.length
        thdot_next = thdot + (3.0 * g / (2.0 * l) * sin_th + 3.0 / (m * l * l) * torque) * self.dt
        thdot_next = np.clip(thdot_next, -self.max_speed, self.max_speed)
        th_next = th + thdot_next * self.dt
        s_next = np.stack([np.cos(th_next), np.sin(th_next), thdot_next], axis=-1)
        return s_next, r

    def reward(self, s, a):
        s = np.asarray(s, dtype=np.float64)
        th = np.arctan2(s[..., 1], s[..., 0])
        thdot = s[..., 2]
        torque = np.asarray(a, dtype=np.float64)[..., 0]
        return -(th**2 + 0.1 * thdot**2 + 0.001 * torque**2)

    def terminal(self, s):
        return np.zeros(np.asarray(s).shape[:-1], dtype=bool)


class NoisyActionEnv:
    """Adds N(0, sigma^2 I) to the executed action, then clips to the action box.

    The perturbation is part of the environment: callers record the agent's
    intended action, and the buffer never sees the noise.
    """

    def __init__(self, base, sigma):
        if sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        self.base = base
        self.sigma = sigma
        base_spec = base.spec
        self.spec = EnvSpec(
            name=base_spec.name + "-noisy",
            state_dim=base_spec.state_dim,
            action_dim=base_spec.action_dim,
            action_low=base_spec.action_low,
            action_high=base_spec.action_high,
            horizon=base_spec.horizon,
        )

    def reset(self, rng, n=None):
        return self.base.reset(rng, n)

    def step(self, s, a, rng=None):
        executed = noisy_action(a, self.sigma, rng, self.spec.action_low, self.spec.action_high)
        return self.base.step(s, executed)

    def reward(self, s, a):
        return self.base.reward(s, a)

    def terminal(self, s):
        return self.base.terminal(s)


def noisy_action(a, sigma, rng, low, high):
    """Perturb `a` with Gaussian noise of std `sigma` and clip into [low, high]."""
    a = np.asarray(a, dtype=np.float64)
    if sigma == 0.0:
        return np.clip(a, low, high)
    return np.clip(a + rng.normal(0.0, sigma, size=a.shape), low, high)


def scripted_point_policy(s):
    """Greedy oracle for the point environment: step straight toward the goal."""
    return np.clip(-np.asarray(s, dtype=np.float64), -1.0, 1.0)


def make_env(name, noise_sigma=0.1, horizon=None):
    """Build an environment by config name."""
    base_names = {
        "point2d": lambda: Point2DEnv(**({"horizon": horizon} if horizon else {})),
        "pendulum": lambda: PendulumEnv(**({"horizon": horizon} if horizon else {})),
    }
    if name in base_names:
        return base_names[name]()
    if name.endswith("-noisy"):
        root = name[: -len("-noisy")]
        if root in base_names:
            return NoisyActionEnv(base_names[root](), noise_sigma)
    raise ConfigError(f"unknown environment {name!r} (expected one of "
                      "point2d, pendulum, point2d-noisy, pendulum-noisy)")
