"""Single-file run checkpoints: JSON metadata followed by a flat binary
array snapshot. Restoring reproduces the next epoch bit-identically."""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import TrainerConfig
from .errors import CheckpointError
from .nets import SnapshotError, dumps_arrays, loads_arrays

_MAGIC = b"CMBC"


def _trainer_arrays(trainer):
    arrays = list(trainer.ensemble.state_arrays())
    arrays += [(name, p.data) for name, p in trainer.q1.named_params("q1.")]
    arrays += [(name, p.data) for name, p in trainer.q1_target.mlp.named_params("q1t.")]
    arrays += trainer.q1_opt.state_arrays("q1.adam.")
    if trainer.q2 is not None:
        arrays += [(name, p.data) for name, p in trainer.q2.named_params("q2.")]
        arrays += [(name, p.data) for name, p in trainer.q2_target.mlp.named_params("q2t.")]
        arrays += trainer.q2_opt.state_arrays("q2.adam.")
    arrays += [(name, p.data) for name, p in trainer.policy.named_params("policy.")]
    arrays += trainer.policy_opt.state_arrays("policy.adam.")
    arrays += [("temperature.log_alpha", trainer.temperature.log_alpha.data)]
    arrays += trainer.temperature.optimizer.state_arrays("temperature.adam.")
    arrays += trainer.env_buffer.state_arrays("env_buf.")
    arrays += trainer.model_buffer.state_arrays("model_buf.")
    if trainer.cur_state is not None:
        arrays += [("episode.state", np.asarray(trainer.cur_state, dtype=np.float64))]
    return arrays


def save_checkpoint(trainer, path):
    meta = {
        "format": 1,
        "config": trainer.cfg.to_dict(),
        "epoch": trainer.epoch,
        "env_steps": trainer.env_steps,
        "ep_t": trainer.ep_t,
        "has_cur_state": trainer.cur_state is not None,
        "warmed_up": trainer.warmed_up,
        "rng": trainer.rng.state(),
        "ensemble": trainer.ensemble.state_meta(),
        "adam_t": {
            "q1": trainer.q1_opt.t,
            "q2": trainer.q2_opt.t if trainer.q2_opt else 0,
            "policy": trainer.policy_opt.t,
            "temperature": trainer.temperature.optimizer.t,
        },
        "env_buf_ptr": trainer.env_buffer.ptr,
        "model_buf_ptr": trainer.model_buffer.ptr,
    }
    blob = dumps_arrays(_trainer_arrays(trainer))
    encoded = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(encoded)))
        f.write(encoded)
        f.write(blob)


def load_checkpoint(path):
    """Rebuild a trainer from a checkpoint file; raises CheckpointError on
    malformed input."""
    from .trainer import Trainer

    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    try:
        (meta_len,) = struct.unpack_from("<Q", raw, 4)
        meta = json.loads(raw[12 : 12 + meta_len].decode("utf-8"))
        arrays = loads_arrays(raw[12 + meta_len :])
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError, SnapshotError) as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from e
    if meta.get("format") != 1:
        raise CheckpointError(f"unsupported checkpoint format {meta.get('format')!r}")

    config = TrainerConfig.from_dict(meta["config"])
    trainer = Trainer(config)

    try:
        trainer.ensemble.load_state_arrays(arrays, meta["ensemble"])
        for name, p in trainer.q1.named_params("q1."):
            p.data[...] = arrays[name]
        for name, p in trainer.q1_target.mlp.named_params("q1t."):
            p.data[...] = arrays[name]
        trainer.q1_opt.load_state_arrays("q1.adam.", arrays)
        trainer.q1_opt.t = meta["adam_t"]["q1"]
        if trainer.q2 is not None:
            for name, p in trainer.q2.named_params("q2."):
                p.data[...] = arrays[name]
            for name, p in trainer.q2_target.mlp.named_params("q2t."):
                p.data[...] = arrays[name]
            trainer.q2_opt.load_state_arrays("q2.adam.", arrays)
            trainer.q2_opt.t = meta["adam_t"]["q2"]
        for name, p in trainer.policy.named_params("policy."):
            p.data[...] = arrays[name]
        trainer.policy_opt.load_state_arrays("policy.adam.", arrays)
        trainer.policy_opt.t = meta["adam_t"]["policy"]
        trainer.temperature.log_alpha.data[...] = arrays["temperature.log_alpha"]
        trainer.temperature.optimizer.load_state_arrays("temperature.adam.", arrays)
        trainer.temperature.optimizer.t = meta["adam_t"]["temperature"]
        trainer.env_buffer.load_state_arrays("env_buf.", arrays, meta["env_buf_ptr"])
        trainer.model_buffer.load_state_arrays("model_buf.", arrays, meta["model_buf_ptr"])
    except KeyError as e:
        raise CheckpointError(f"checkpoint {path} is missing array {e}") from e

    trainer.rng.load_state(meta["rng"])
    trainer.epoch = meta["epoch"]
    trainer.env_steps = meta["env_steps"]
    trainer.ep_t = meta["ep_t"]
    trainer.cur_state = arrays["episode.state"] if meta["has_cur_state"] else None
    trainer.warmed_up = meta["warmed_up"]
    return trainer
