"""Run configuration: one flat, typed key-value document.

Unknown keys and wrong types are hard errors — silent hyperparameter typos
are the failure mode this guards against. `resolved()` applies the variant's
structural constraints (forced M/L, network size class, entropy switches)
and returns the exact settings a run uses; the manifest records that
resolved form.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .variants import get_variant


@dataclass
class TrainerConfig:
    env: str = "point2d"                       # point2d | pendulum | *-noisy
    variant: str = "cmbac"
    seed: int = 0
    epochs: int = 25
    steps_per_epoch: int = 250                 # real env steps per epoch
    updates_per_step: int = 20                 # gradient updates per env step
    init_random_steps: int = 250               # warm-up steps before epoch 1 (not counted in epoch steps)
    discount: float = 0.99

    ensemble_size: int = 7
    elite_count: int = 5
    networks_per_model: int = 2                # M; combinations give K = C(elite_count, M)
    drop_count: int = 1                        # L; per-network estimates dropped from the top
    model_hidden: list = field(default_factory=lambda: [64, 64])
    model_train_steps: int = 120               # gradient steps per network per training call
    model_batch_size: int = 64
    model_lr: float = 1e-3
    holdout_fraction: float = 0.2
    min_model_samples: int = 100

    rollouts_per_step: int = 10
    horizon_start: int = 1                     # model-rollout length ramp: start value
    horizon_end: int = 1                       # ramp end value
    horizon_ramp_start: int = 1                # epoch where the ramp begins
    horizon_ramp_end: int = 2                  # epoch where the ramp ends
    model_buffer_epochs: int = 5               # retain rollouts from this many recent epochs
    env_buffer_capacity: int = 100000

    full_scale: bool = False                   # source-paper network widths instead of desk widths
    critic_hidden: list | None = None          # null -> resolved from variant size class
    policy_hidden: list = field(default_factory=lambda: [64, 64])
    q_lr: float = 3e-4
    policy_lr: float = 3e-4
    alpha_lr: float = 3e-4
    batch_size: int = 64
    tau: float = 0.005
    auto_alpha: bool = True
    initial_alpha: float = 0.05
    reward_mode: str = "known"                 # known (analytic r(s,a)) | learned (model-sampled)
    mopo_penalty: float = 1.0
    up_penalty: float = 0.1

    eval_episodes: int = 10
    eval_every: int = 1
    checkpoint_every: int = 0                  # 0 = final checkpoint only
    noise_sigma: float = 0.1
    env_horizon: int | None = None             # null -> environment default

    # ------------------------------------------------------------------

    def validate(self):
        for name in ("epochs", "steps_per_epoch", "updates_per_step", "ensemble_size",
                     "elite_count", "networks_per_model", "model_train_steps",
                     "model_batch_size", "rollouts_per_step", "horizon_start", "horizon_end",
                     "model_buffer_epochs", "env_buffer_capacity", "batch_size",
                     "eval_episodes", "eval_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("seed", "init_random_steps", "drop_count", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("model_lr", "q_lr", "policy_lr", "alpha_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 < self.discount <= 1.0:
            raise ConfigError(f"discount must be in (0, 1], got {self.discount}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")
        if self.elite_count > self.ensemble_size:
            raise ConfigError(f"elite_count {self.elite_count} exceeds ensemble_size {self.ensemble_size}")
        if not 1 <= self.networks_per_model <= self.elite_count:
            raise ConfigError(
                f"networks_per_model must be in [1, {self.elite_count}], got {self.networks_per_model}"
            )
        if self.horizon_ramp_start >= self.horizon_ramp_end:
            raise ConfigError("horizon_ramp_start must be < horizon_ramp_end")
        if self.reward_mode not in ("known", "learned"):
            raise ConfigError(f"reward_mode must be 'known' or 'learned', got {self.reward_mode!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.initial_alpha < 0:
            raise ConfigError("initial_alpha must be >= 0")
        if self.env_horizon is not None and self.env_horizon < 1:
            raise ConfigError("env_horizon must be >= 1")
        for name in ("model_hidden", "policy_hidden"):
            _check_hidden(name, getattr(self, name))
        if self.critic_hidden is not None:
            _check_hidden("critic_hidden", self.critic_hidden)
        get_variant(self.variant)

    def resolved(self):
        """Apply variant structure; returns (resolved config copy, VariantSpec, K)."""
        self.validate()
        variant = get_variant(self.variant)
        cfg = dataclasses.replace(self)
        cfg.variant = variant.name
        if not variant.multi_head:
            cfg.networks_per_model = cfg.elite_count
        if variant.force_drop_zero:
            cfg.drop_count = 0
        if not variant.entropy:
            cfg.auto_alpha = False
            cfg.initial_alpha = 0.0
        if cfg.critic_hidden is None:
            if cfg.full_scale:
                cfg.critic_hidden = [512, 512, 512] if variant.big_critic else [256, 256]
            else:
                cfg.critic_hidden = [128, 128]
        k = math.comb(cfg.elite_count, cfg.networks_per_model)
        if not 0 <= cfg.drop_count <= k - 1:
            raise ConfigError(f"drop_count must be in [0, {k - 1}] for K={k}, got {cfg.drop_count}")
        return cfg, variant, k

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = _coerce(key, value)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a flat JSON object")
        return cls.from_dict(data)


_INT_KEYS = {
    "seed", "epochs", "steps_per_epoch", "updates_per_step", "init_random_steps",
    "ensemble_size", "elite_count", "networks_per_model", "drop_count",
    "model_train_steps", "model_batch_size", "min_model_samples", "rollouts_per_step",
    "horizon_start", "horizon_end", "horizon_ramp_start", "horizon_ramp_end",
    "model_buffer_epochs", "env_buffer_capacity", "batch_size",
    "eval_episodes", "eval_every", "checkpoint_every",
}
_FLOAT_KEYS = {
    "discount", "model_lr", "holdout_fraction", "q_lr", "policy_lr", "alpha_lr",
    "tau", "initial_alpha", "mopo_penalty", "up_penalty", "noise_sigma",
}
_BOOL_KEYS = {"full_scale", "auto_alpha"}
_STR_KEYS = {"env", "variant", "reward_mode"}
_LIST_KEYS = {"model_hidden", "policy_hidden", "critic_hidden"}


def _coerce(key, value):
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be a boolean, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
        return value
    if key in _LIST_KEYS:
        if value is None and key == "critic_hidden":
            return None
        if not isinstance(value, list):
            raise ConfigError(f"config key {key!r} must be a list of integers, got {value!r}")
        return list(value)
    if key == "env_horizon":
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"config key {key!r} must be an integer or null, got {value!r}")
        return value
    raise ConfigError(f"unknown config key {key!r}")


def _check_hidden(name, value):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty list of layer widths")
    for width in value:
        if isinstance(width, bool) or not isinstance(width, int) or width < 1:
            raise ConfigError(f"{name} entries must be integers >= 1, got {width!r}")
