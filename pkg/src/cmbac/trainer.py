"""Training orchestration: epochs, environment interaction, model rollouts,
gradient updates, evaluation, metric emission.

Determinism contract: given (config, seed), the metric stream is bit-identical
across runs. Every random draw flows through a named stream (see `rng`), and
the per-gradient-update draw order is frozen:

    1. batch indices                      (critic stream)
    2. per-head target action noise       (critic stream, one (B*K, dA) draw
                                           inside policy.sample_np)
    3. actor reparameterization noise     (actor stream, one (B, dA) draw)

followed by the fixed update order: critic(s), actor, temperature, polyak.
"""

from __future__ import annotations

import json
import os
import time

import numpy as np

from . import __version__
from . import autodiff as ad
from .buffers import EnvBuffer, ModelBuffer
from .critic import MultiHeadQ, critic_loss, head_targets, polyak_update, shared_mean_targets
from .dynamics import GaussianEnsemble, ModelSet, branched_rollout, horizon_schedule
from .envs import make_env
from .errors import ConfigError, TrainingAborted
from .nets import Adam
from .policy import SquashedGaussianPolicy, Temperature, actor_loss
from .rng import RngBundle


def evaluate_policy(policy, env, n_episodes, rng):
    """Mean and std of undiscounted episode return under the deterministic
    (mean) action, over `n_episodes` fresh episodes."""
    if n_episodes < 1:
        raise ConfigError(f"eval episodes must be >= 1, got {n_episodes}")
    s = env.reset(rng, n=n_episodes)
    returns = np.zeros(n_episodes)
    for _ in range(env.spec.horizon):
        a = policy.deterministic_np(s)
        s, r = env.step(s, a, rng)
        returns += r
    return float(returns.mean()), float(returns.std())


class Trainer:
    def __init__(self, config, out_dir=None):
        self.base_config = config
        cfg, variant, k = config.resolved()
        self.cfg = cfg
        self.variant = variant
        self.k = k
        self.out_dir = out_dir

        self.env = make_env(cfg.env, cfg.noise_sigma, cfg.env_horizon)
        spec = self.env.spec
        self.rng = RngBundle(cfg.seed)

        self.ensemble = GaussianEnsemble(
            spec.state_dim, spec.action_dim, cfg.ensemble_size, cfg.elite_count,
            cfg.model_hidden, cfg.model_lr, self.rng.model_init,
        )
        self.model_set = ModelSet(cfg.elite_count, cfg.networks_per_model)

        self.q1 = MultiHeadQ(spec.state_dim, spec.action_dim, cfg.critic_hidden, k, self.rng.critic)
        self.q1_target = self.q1.clone()
        if variant.twin_critic:
            self.q2 = MultiHeadQ(spec.state_dim, spec.action_dim, cfg.critic_hidden, k, self.rng.critic)
            self.q2_target = self.q2.clone()
        else:
            self.q2 = None
            self.q2_target = None

        self.policy = SquashedGaussianPolicy(
            spec.state_dim, spec.action_dim, cfg.policy_hidden, self.rng.actor,
            spec.action_low, spec.action_high,
        )
        self.temperature = Temperature(
            auto=cfg.auto_alpha, initial=cfg.initial_alpha,
            target_entropy=-float(spec.action_dim), lr=cfg.alpha_lr,
        )

        self.q1_opt = Adam(self.q1.params(), lr=cfg.q_lr)
        self.q2_opt = Adam(self.q2.params(), lr=cfg.q_lr) if self.q2 else None
        self.policy_opt = Adam(self.policy.params(), lr=cfg.policy_lr)

        self.env_buffer = EnvBuffer(cfg.env_buffer_capacity, spec.state_dim, spec.action_dim)
        max_h = max(cfg.horizon_start, cfg.horizon_end)
        model_capacity = cfg.model_buffer_epochs * cfg.steps_per_epoch * cfg.rollouts_per_step * max_h
        self.model_buffer = ModelBuffer(model_capacity, spec.state_dim, spec.action_dim, k)

        self.epoch = 0
        self.env_steps = 0
        self.cur_state = None
        self.ep_t = 0
        self.warmed_up = False
        self.metrics = []

    # ------------------------------------------------------------------
    # environment interaction

    def _env_step(self, action_fn):
        if self.cur_state is None:
            self.cur_state = self.env.reset(self.rng.env)
            self.ep_t = 0
        s = self.cur_state
        a = action_fn(s)
        s_next, r = self.env.step(s, a, self.rng.env)
        self.ep_t += 1
        done = self.ep_t >= self.env.spec.horizon
        self.env_buffer.add(s, a, float(r), s_next, done)
        self.cur_state = None if done else s_next

    def _warmup(self):
        spec = self.env.spec
        for _ in range(self.cfg.init_random_steps):
            self._env_step(
                lambda s: self.rng.init_explore.uniform(spec.action_low, spec.action_high)
            )
        self.warmed_up = True

    def _policy_action(self, s):
        a, _ = self.policy.sample_np(s[None, :], self.rng.env)
        return a[0]

    # ------------------------------------------------------------------
    # gradient updates

    def _resolve_rewards(self, s, a, r, branch_r, u):
        """Reward matrix (B, K) for per-model targets, honoring the reward
        mode and the uncertainty penalty."""
        if self.cfg.reward_mode == "known":
            base = np.repeat(np.asarray(self.env.reward(s, a))[:, None], self.k, axis=1)
        else:
            base = branch_r
        if self.variant.reward_penalty:
            base = base - self.cfg.mopo_penalty * u[:, None]
        return base

    def _gradient_update(self):
        cfg = self.cfg
        b = cfg.batch_size
        idx = self.model_buffer.sample_indices(b, self.rng.critic)
        s, a, r, s_next, _, branch_s, branch_r, u = self.model_buffer.gather(idx)

        alpha = self.temperature.value
        targets = [self.q1_target] + ([self.q2_target] if self.q2_target else [])

        if self.variant.target_rule == "per_model":
            rewards = self._resolve_rewards(s, a, r, branch_r, u)
            y = head_targets(branch_s, rewards, self.policy, targets, alpha,
                             cfg.discount, self.rng.critic)
        else:
            base = np.asarray(self.env.reward(s, a)) if cfg.reward_mode == "known" else r
            y = shared_mean_targets(s_next, base, self.policy, targets,
                                    cfg.discount, self.rng.critic, self.k)
        if not np.isfinite(y).all():
            raise TrainingAborted("non-finite critic targets")

        # the two critics' graphs are disjoint below the sum, so one backward
        # traversal yields exactly the per-network gradients
        loss1 = critic_loss(self.q1, s, a, y)
        q1_loss_value = float(loss1.data)
        total = loss1
        if self.q2 is not None:
            loss2 = critic_loss(self.q2, s, a, y)
            total = ad.add(loss1, loss2)
        if not np.isfinite(total.data):
            raise TrainingAborted("non-finite critic loss")
        self.q1_opt.zero_grad()
        if self.q2_opt:
            self.q2_opt.zero_grad()
        ad.backward(total)
        self.q1_opt.step()
        if self.q2_opt:
            self.q2_opt.step()

        eps = self.rng.actor.standard_normal((b, self.env.spec.action_dim))
        critics = [self.q1] + ([self.q2] if self.q2 else [])
        a_loss, logp = actor_loss(self.policy, s, critics, alpha,
                                  self.variant.aggregation, cfg.drop_count,
                                  cfg.up_penalty, eps)
        if not np.isfinite(a_loss.data):
            raise TrainingAborted("non-finite actor loss")
        self.policy_opt.zero_grad()
        ad.backward(a_loss)
        self.policy_opt.step()

        self.temperature.update(logp)

        polyak_update(self.q1_target, self.q1, cfg.tau)
        if self.q2:
            polyak_update(self.q2_target, self.q2, cfg.tau)

        return {
            "critic_loss": q1_loss_value,
            "actor_loss": float(a_loss.data),
            "entropy": -float(np.mean(logp)),
        }

    # ------------------------------------------------------------------
    # epoch loop

    def train_epoch(self):
        """One full epoch; returns the metric record (also appended to .metrics)."""
        cfg = self.cfg
        if not self.warmed_up:
            self._warmup()
        self.epoch += 1
        model_horizon = horizon_schedule(
            self.epoch, cfg.horizon_start, cfg.horizon_end,
            cfg.horizon_ramp_start, cfg.horizon_ramp_end,
        )

        model_stats = None
        if len(self.env_buffer) >= cfg.min_model_samples:
            try:
                model_stats = self.ensemble.train(
                    self.env_buffer, steps=cfg.model_train_steps,
                    batch_size=cfg.model_batch_size,
                    holdout_fraction=cfg.holdout_fraction, rng=self.rng.model_train,
                )
            except FloatingPointError as e:
                raise TrainingAborted(str(e)) from e

        critic_losses = []
        actor_losses = []
        entropies = []
        rollout_added = 0
        rollout_reward = 0.0
        rollout_u = 0.0
        rollout_branch_std = 0.0
        rollout_calls = 0
        for _ in range(cfg.steps_per_epoch):
            self._env_step(self._policy_action)
            self.env_steps += 1
            if self.ensemble.trained:
                stats = branched_rollout(
                    self.ensemble, self.model_set, self.policy, self.env_buffer,
                    self.model_buffer, model_horizon, cfg.rollouts_per_step,
                    self.rng.rollout,
                )
                rollout_added += stats["appended"]
                rollout_reward += stats["reward_mean"]
                rollout_u += stats["u_mean"]
                rollout_branch_std += stats["branch_reward_std"]
                rollout_calls += 1
            if len(self.model_buffer) >= cfg.batch_size:
                for _ in range(cfg.updates_per_step):
                    upd = self._gradient_update()
                    critic_losses.append(upd["critic_loss"])
                    actor_losses.append(upd["actor_loss"])
                    entropies.append(upd["entropy"])

        record = {
            "epoch": self.epoch,
            "env_steps": self.env_steps,
            "model_horizon": model_horizon,
            "elite_nll": model_stats["elite_nll_mean"] if model_stats else None,
            "critic_loss": float(np.mean(critic_losses)) if critic_losses else None,
            "actor_loss": float(np.mean(actor_losses)) if actor_losses else None,
            "policy_entropy": float(np.mean(entropies)) if entropies else None,
            "alpha": self.temperature.value,
            "rollout_added": rollout_added,
            "rollout_reward_mean": rollout_reward / rollout_calls if rollout_calls else None,
            "rollout_u_mean": rollout_u / rollout_calls if rollout_calls else None,
            "rollout_branch_std": rollout_branch_std / rollout_calls if rollout_calls else None,
            "env_buffer": len(self.env_buffer),
            "model_buffer": len(self.model_buffer),
        }
        record.update(self._probe_q_stats())
        if self.epoch % cfg.eval_every == 0:
            mean, std = evaluate_policy(self.policy, self.env, cfg.eval_episodes, self.rng.eval)
            record["eval_return_mean"] = mean
            record["eval_return_std"] = std
        else:
            record["eval_return_mean"] = None
            record["eval_return_std"] = None
        self.metrics.append(record)
        return record

    def _probe_q_stats(self):
        """Per-head and conservative Q statistics on a fixed probe batch."""
        if len(self.model_buffer) == 0:
            return {"q_head_mean": None, "q_head_std": None, "q_conservative_mean": None}
        from .variants import aggregate_np

        n = min(256, len(self.model_buffer))
        s, a = self.model_buffer.s[:n], self.model_buffer.a[:n]
        h1 = self.q1.forward_np(s, a)
        h2 = self.q2.forward_np(s, a) if self.q2 else None
        cons = aggregate_np(h1, h2, self.variant.aggregation, self.cfg.drop_count,
                            self.cfg.up_penalty)
        return {
            "q_head_mean": float(h1.mean()),
            "q_head_std": float(h1.std(axis=1).mean()),
            "q_conservative_mean": float(cons.mean()),
        }

    # ------------------------------------------------------------------
    # full runs

    def run(self, epoch_callback=None):
        """Train to the configured epoch count, emitting metrics (and files
        when an output directory is set). On a non-finite abort, the abort is
        recorded and re-raised; the last-good checkpoint is kept."""
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
            if self.epoch == 0:
                self._write_manifest()
        try:
            while self.epoch < self.cfg.epochs:
                record = self.train_epoch()
                if self.out_dir:
                    self._append_metrics(record)
                    every = self.cfg.checkpoint_every
                    if every and self.epoch % every == 0 and self.epoch < self.cfg.epochs:
                        self.save_checkpoint(os.path.join(self.out_dir, f"checkpoint_{self.epoch:04d}.ckpt"))
                if epoch_callback:
                    epoch_callback(record)
        except TrainingAborted as e:
            if self.out_dir:
                with open(os.path.join(self.out_dir, "abort.json"), "w") as f:
                    json.dump({"epoch": self.epoch, "reason": str(e)}, f)
            raise
        if self.out_dir:
            self.save_checkpoint(os.path.join(self.out_dir, "checkpoint_final.ckpt"))
        return self.metrics

    def _append_metrics(self, record):
        with open(os.path.join(self.out_dir, "metrics.jsonl"), "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def _write_manifest(self):
        manifest = {
            "version": __version__,
            "config": self.cfg.to_dict(),
            "variant": self.variant.name,
            "k": self.k,
            "drop_count": self.cfg.drop_count,
            "rng_streams": list(self.rng.state().keys()),
            "parallel": False,
            "init_random_steps": self.cfg.init_random_steps,
            "metrics_file": "metrics.jsonl",
            "checkpoint_file": "checkpoint_final.ckpt",
            "created_unix": int(time.time()),
        }
        with open(os.path.join(self.out_dir, "run_manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    def save_checkpoint(self, path):
        from .checkpoint import save_checkpoint

        save_checkpoint(self, path)


def run_training(config, out_dir=None, epoch_callback=None):
    """Build a trainer and run it to completion; returns the trainer."""
    trainer = Trainer(config, out_dir)
    trainer.run(epoch_callback)
    return trainer
