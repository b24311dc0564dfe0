"""Named, independently derived random streams.

One root seed fans out into fixed named streams via numpy SeedSequence with
the stream's index as extra entropy, so adding draws to one component never
shifts another's. Stream states round-trip through checkpoints exactly.
"""

from __future__ import annotations

import numpy as np

STREAM_NAMES = (
    "env",           # resets, environment noise, interaction action sampling
    "init_explore",  # warm-up uniform actions
    "model_init",    # ensemble weight initialization
    "model_train",   # bootstrap splits and minibatch picks
    "rollout",       # branched model rollouts
    "critic",        # critic init, batch sampling, target action noise
    "actor",         # policy init, reparameterization noise
    "eval",          # evaluation episodes
    "diag",          # diagnostics point selection and rollouts
)


def make_stream(seed, name):
    idx = STREAM_NAMES.index(name)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), idx])))


class RngBundle:
    """All named streams for one run."""

    def __init__(self, seed):
        self.seed = seed
        for name in STREAM_NAMES:
            setattr(self, name, make_stream(seed, name))

    def state(self):
        return {name: getattr(self, name).bit_generator.state for name in STREAM_NAMES}

    def load_state(self, state):
        for name in STREAM_NAMES:
            getattr(self, name).bit_generator.state = state[name]
