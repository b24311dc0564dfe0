"""Command-line entry point: train, eval, diag, sweep."""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys

from .config import TrainerConfig
from .errors import CheckpointError, ConfigError, TrainingAborted


def build_parser():
    parser = argparse.ArgumentParser(prog="cmbac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--variant", help="override the config variant")
    p_train.add_argument("--out", default="run", help="output directory (default: ./run)")
    p_train.add_argument("--resume", help="checkpoint file to continue from")

    p_eval = sub.add_parser("eval", help="evaluate a checkpointed policy")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, required=True)
    p_eval.add_argument("--seed", type=int, default=None, help="evaluation stream seed override")

    p_diag = sub.add_parser("diag", help="uncertainty and overestimation diagnostics")
    diag_sub = p_diag.add_subparsers(dest="diag_command", required=True)
    for name in ("scatter", "model-estimates"):
        p = diag_sub.add_parser(name)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--points", type=int, default=200)
        p.add_argument("--mc-episodes", type=int, default=5)
        p.add_argument("--seed", type=int, default=None, help="diagnostics stream seed override")

    p_sweep = sub.add_parser("sweep", help="cartesian grid of training runs")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--grid", required=True, help="JSON file: key -> list of values")
    p_sweep.add_argument("--out", default="sweep", help="output directory root")
    return parser


def _load_config(path, seed=None, variant=None):
    cfg = TrainerConfig.from_file(path) if path else TrainerConfig()
    if seed is not None:
        cfg.seed = seed
    if variant is not None:
        cfg.variant = variant
    cfg.validate()
    return cfg


def cmd_train(args):
    from .checkpoint import load_checkpoint
    from .trainer import Trainer

    if args.resume:
        trainer = load_checkpoint(args.resume)
        trainer.out_dir = args.out
    else:
        trainer = Trainer(_load_config(args.config, args.seed, args.variant), args.out)
    try:
        trainer.run()
    except TrainingAborted as e:
        print(f"run aborted: {e}", file=sys.stderr)
        return 2
    last = trainer.metrics[-1] if trainer.metrics else {}
    print(json.dumps({"out": args.out, "epochs": trainer.epoch,
                      "eval_return_mean": last.get("eval_return_mean")}))
    return 0


def cmd_eval(args):
    from .checkpoint import load_checkpoint
    from .rng import make_stream
    from .trainer import evaluate_policy

    trainer = load_checkpoint(args.checkpoint)
    rng = make_stream(args.seed, "eval") if args.seed is not None else trainer.rng.eval
    mean, std = evaluate_policy(trainer.policy, trainer.env, args.episodes, rng)
    print(json.dumps({"episodes": args.episodes, "return_mean": mean, "return_std": std}))
    return 0


def cmd_diag(args):
    from .checkpoint import load_checkpoint
    from .diagnostics import (
        model_estimate_records,
        scatter_records,
        write_model_estimates_csv,
        write_scatter_csv,
    )
    from .rng import make_stream

    trainer = load_checkpoint(args.checkpoint)
    rng = make_stream(args.seed, "diag") if args.seed is not None else trainer.rng.diag
    os.makedirs(args.out, exist_ok=True)

    if args.diag_command == "scatter":
        critics = [trainer.q1] + ([trainer.q2] if trainer.q2 else [])
        columns, corr = scatter_records(
            trainer.env, trainer.policy, critics, trainer.ensemble,
            n_points=args.points, gamma=trainer.cfg.discount,
            mc_episodes=args.mc_episodes, rng=rng,
            aggregation=trainer.variant.aggregation,
            drop=trainer.cfg.drop_count, penalty=trainer.cfg.up_penalty,
        )
        csv_path = os.path.join(args.out, "scatter.csv")
        write_scatter_csv(csv_path, columns)
        summary = {
            "spearman": corr,
            "n_points": args.points,
            "mc_episodes": args.mc_episodes,
            "gamma": trainer.cfg.discount,
            "rollout_steps": trainer.env.spec.horizon,
            "note": "model-error rollouts use the environment horizon, not the source protocol's 1000 steps",
        }
        with open(os.path.join(args.out, "scatter_summary.json"), "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
        print(json.dumps(summary["spearman"]))
    else:
        records = model_estimate_records(
            trainer.env, trainer.policy, trainer.q1,
            n_points=args.points, gamma=trainer.cfg.discount,
            mc_episodes=args.mc_episodes, rng=rng,
        )
        csv_path = os.path.join(args.out, "model_estimates.csv")
        write_model_estimates_csv(csv_path, records)
        print(json.dumps({"points": int(records["mc_return"].shape[0]), "csv": csv_path}))
    return 0


def cmd_sweep(args):
    from .trainer import Trainer

    base = TrainerConfig.from_file(args.config)
    with open(args.grid) as f:
        grid = json.load(f)
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ConfigError("grid file must map config keys to lists of values")

    keys = sorted(grid)
    index = []
    for values in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, values))
        cfg = TrainerConfig.from_dict({**base.to_dict(), **overrides})
        tag = "_".join(f"{k}-{v}" for k, v in overrides.items())
        out = os.path.join(args.out, tag)
        trainer = Trainer(cfg, out)
        try:
            trainer.run()
            status = "ok"
        except TrainingAborted:
            status = "aborted"
        last = trainer.metrics[-1] if trainer.metrics else {}
        index.append({"run": tag, "overrides": overrides, "status": status,
                      "eval_return_mean": last.get("eval_return_mean")})
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep_index.json"), "w") as f:
        json.dump(index, f, indent=2, sort_keys=True)
    print(json.dumps({"runs": len(index)}))
    return 0 if all(r["status"] == "ok" for r in index) else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "diag":
            return cmd_diag(args)
        if args.command == "sweep":
            return cmd_sweep(args)
    except (ConfigError, CheckpointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
