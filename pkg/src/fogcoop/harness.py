"""Experiment driver: oracle batches, baselines, sweeps, metric files."""
from __future__ import annotations

import numpy as np

from .allocation import Allocation
from .config import RadioConfig, ScenarioConfig
from .radio import ChannelState, sample_channels
from .seeding import stream
from .world import World


def random_cluster_instance(num_vues: int, num_rbs: int, seed: int,
                            node: str = "cloud", external: int = 0
                            ) -> tuple[World, RadioConfig, Allocation, ChannelState, int]:
    """One random single-cluster RB-allocation instance.

    All `num_vues` cluster VUEs sit in the requested mode with at least one
    selected block each. `external` extra VUEs transmit in the other mode on
    round-robin RBs as a fixed interference background.
    """
    total = num_vues + external
    scen = ScenarioConfig(num_vues=total)
    rcfg = RadioConfig(total_bandwidth_hz=1.5e6 * num_rbs, rb_bandwidth_hz=1.5e6)
    rng = stream(seed, "instances")
    world = World.generate(scen, rng)
    alloc = Allocation.empty(total, scen.num_faps + 1, scen.num_blocks, num_rbs)

    node_index = 0 if node == "cloud" else 1
    other_index = 1 if node == "cloud" else 0
    for k in range(num_vues):
        alloc.mode[k, node_index] = 1
        window = world.sensed_blocks(k)
        count = int(rng.integers(1, len(window) + 1))
        chosen = rng.choice(window, size=count, replace=False)
        alloc.blocks[k, chosen] = 1
    for i, k in enumerate(range(num_vues, total)):
        alloc.mode[k, other_index] = 1
        alloc.blocks[k, world.sensed_blocks(k)[0]] = 1
        alloc.rbs[k, i % num_rbs] = 1

    channels = sample_channels(world, rcfg, 0, stream(seed, "channels"))
    return world, rcfg, alloc, channels, node_index
