"""Named random streams derived from one root seed.

Every source of randomness gets its own generator keyed by (purpose,
episode), so partial re-runs (resume from a checkpoint, re-running one
episode) reproduce the original draws exactly.
"""
from __future__ import annotations

import numpy as np

# Stable purpose ids; appending is fine, renumbering breaks reproducibility.
_PURPOSES = {
    "world": 0,      # VUE placement, speeds, deadlines, chain init
    "channels": 1,   # per-step fading draws
    "values": 2,     # temporal value chain transitions
    "explore": 3,    # actor exploration noise
    "replay": 4,     # minibatch sampling
    "init": 5,       # network weight initialization
    "policy": 6,     # scripted/random baseline policies
    "instances": 7,  # random oracle-check instances
}


def stream(root_seed: int, purpose: str, episode: int = 0) -> np.random.Generator:
    """Independent generator for (root_seed, purpose, episode)."""
    key = _PURPOSES[purpose]
    seq = np.random.SeedSequence(entropy=root_seed, spawn_key=(key, episode))
    return np.random.default_rng(seq)
