"""Joint decision variables and the objective machinery: latency,
satisfaction, constraint compliance, and block-conflict arbitration.

The four decisions are: offloading mode (cloud or one F-AP) per VUE,
block-message selection per VUE, one RB per VUE, and a CPU frequency per
VUE at its serving node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RadioConfig, SatisfactionWeights, ScenarioConfig
from .radio import CLOUD
from .world import World, NotCoveredError


@dataclass
class TaskSpec:
    """Per-VUE task description: block size, cycle density, deadline."""

    block_bits: float
    cycles_per_bit: float
    tau_max_s: float


@dataclass
class Allocation:
    """All decision variables for one time step."""

    mode: np.ndarray    # (K, N+1) one-hot-ish rows; column 0 is the cloud
    blocks: np.ndarray  # (K, B) selected block messages
    rbs: np.ndarray     # (K, S) RB assignment
    freqs: np.ndarray   # (K,) CPU cycles/s at the serving node

    @classmethod
    def empty(cls, num_vues: int, num_nodes: int, num_blocks: int, num_rbs: int) -> "Allocation":
        return cls(mode=np.zeros((num_vues, num_nodes), dtype=np.int8),
                   blocks=np.zeros((num_vues, num_blocks), dtype=np.int8),
                   rbs=np.zeros((num_vues, num_rbs), dtype=np.int8),
                   freqs=np.zeros(num_vues))

    def mode_of(self, k: int) -> int:
        """Serving node index of VUE k, or -1 when unassigned."""
        row = np.flatnonzero(self.mode[k])
        return int(row[0]) if row.size else -1

    def rb_of(self, k: int) -> int:
        row = np.flatnonzero(self.rbs[k])
        return int(row[0]) if row.size else -1


@dataclass
class Violation:
    """One violated constraint, identified by name and subject."""

    constraint: str  # "latency", "block-overlap", "mode", "rb", "freq-budget"
    subject: int     # VUE id, block id, or node index
    detail: str = ""


def cluster_of(node: int, alloc: Allocation) -> list[int]:
    """VUEs served by the given node (0 = cloud, n >= 1 = F-AP n-1)."""
    return [int(k) for k in np.flatnonzero(alloc.mode[:, node])]


def selected_bits(k: int, alloc: Allocation, block_bits: float) -> float:
    return float(alloc.blocks[k].sum()) * block_bits


def comm_latency(cluster: list[int], alloc: Allocation, rates: np.ndarray,
                 rcfg: RadioConfig, block_bits: float) -> float:
    """Upload latency of a cooperative cluster: its slowest member.

    Cloud-mode members pay the fronthaul delay on top of their air time;
    a member with traffic but no rate makes the schedule infeasible.
    """
    worst = 0.0
    for k in cluster:
        bits = selected_bits(k, alloc, block_bits)
        fronthaul = rcfg.fronthaul_delay_s if alloc.mode[k, CLOUD] else 0.0
        if bits == 0.0:
            term = fronthaul
        elif rates[k] <= 0.0:
            return float("inf")
        else:
            term = bits / rates[k] + fronthaul
        worst = max(worst, term)
    return worst


def comp_load_cycles(k: int, alloc: Allocation, world: World) -> float:
    """CPU cycles VUE k's task needs: every selected block in its region."""
    region = world.region_blocks(k)
    if region.size == 0:
        return 0.0
    count = float(alloc.blocks[:, region].sum())
    return count * world.cfg.cycles_per_bit * world.cfg.block_bits


def comp_latency(k: int, alloc: Allocation, world: World) -> float:
    """Processing latency of VUE k's task at its allocated frequency."""
    load = comp_load_cycles(k, alloc, world)
    if load == 0.0:
        return 0.0
    if alloc.freqs[k] <= 0.0:
        return float("inf")
    return load / alloc.freqs[k]


def total_latency(k: int, alloc: Allocation, world: World, rates: np.ndarray,
                  rcfg: RadioConfig) -> float:
    node = alloc.mode_of(k)
    cluster = cluster_of(node, alloc) if node >= 0 else [k]
    comm = comm_latency(cluster, alloc, rates, rcfg, world.cfg.block_bits)
    return comm + comp_latency(k, alloc, world)


def satisfaction(k: int, alloc: Allocation, world: World, latency_s: float,
                 weights: SatisfactionWeights, tau_max_s: float) -> float:
    """Weighted sum of received message values and latency slack for VUE k."""
    region = world.region_blocks(k)
    value = 0.0
    if region.size:
        q = world.chain.values()[:, region]              # (K, |region|)
        w = world.spatial_values(k, region)              # (|region|,)
        sel = alloc.blocks[:, region].astype(float)
        sel[k, :] = 0.0                                  # own uploads carry no value
        value = float((sel * q * w[None, :]).sum())
    return weights.value_weight * value + weights.latency_weight * (tau_max_s - latency_s)


def sum_satisfaction(alloc: Allocation, world: World, latencies: np.ndarray,
                     weights: SatisfactionWeights, tau_max: np.ndarray) -> float:
    return float(sum(satisfaction(k, alloc, world, latencies[k], weights, tau_max[k])
                     for k in range(len(world.vues))))


def sojourn_cap(k: int, alloc: Allocation, world: World) -> float:
    """Sojourn bound of VUE k's mode: +inf in cloud mode, 0 if not covered."""
    node = alloc.mode_of(k)
    if node <= CLOUD:
        return float("inf")
    try:
        return world.sojourn_time(k, node - 1)
    except NotCoveredError:
        return 0.0


def check_constraints(alloc: Allocation, world: World, latencies: np.ndarray,
                      node_budgets: np.ndarray) -> list[Violation]:
    """Every violated constraint of the allocation, with identifiers.

    Latency bounds are checked per VUE against both the deadline and the
    sojourn time; structural constraints cover block overlap, single mode,
    single RB, and per-node frequency budgets.
    """
    out: list[Violation] = []
    K = len(world.vues)
    for k in range(K):
        cap = min(world.vues[k].tau_max_s, sojourn_cap(k, alloc, world))
        if latencies[k] > cap * (1.0 + 1e-9):
            out.append(Violation("latency", k,
                                 f"latency {latencies[k]:.6g}s exceeds cap {cap:.6g}s"))
    claimed = alloc.blocks.sum(axis=0)
    for b in np.flatnonzero(claimed > 1):
        out.append(Violation("block-overlap", int(b),
                             f"block {b} selected by {int(claimed[b])} VUEs"))
    for k in np.flatnonzero(alloc.mode.sum(axis=1) > 1):
        out.append(Violation("mode", int(k), "more than one offloading mode"))
    for k in np.flatnonzero(alloc.rbs.sum(axis=1) > 1):
        out.append(Violation("rb", int(k), "more than one RB"))
    for node in range(alloc.mode.shape[1]):
        members = cluster_of(node, alloc)
        used = float(alloc.freqs[members].sum()) if members else 0.0
        budget = node_budgets[node]
        if used > budget * (1.0 + 1e-9):
            out.append(Violation("freq-budget", node,
                                 f"allocated {used:.6g} exceeds budget {budget:.6g}"))
    return out


def arbitrate_block_conflicts(proposed: np.ndarray, world: World) -> np.ndarray:
    """Resolve multi-claimed blocks: highest temporal value wins, then lower id.

    Idempotent; the result never has a block selected by more than one VUE.
    """
    result = proposed.copy()
    claimed = result.sum(axis=0)
    values = world.chain.values()
    for b in np.flatnonzero(claimed > 1):
        claimants = np.flatnonzero(result[:, b])
        best = claimants[np.lexsort((claimants, -values[claimants, b]))[0]]
        result[:, b] = 0
        result[best, b] = 1
    return result


def node_budgets(world: World) -> np.ndarray:
    """Frequency budget per node, cloud first then F-APs."""
    return np.array([world.cloud.fmax_hz] + [f.fmax_hz for f in world.faps])


def task_specs(world: World) -> list[TaskSpec]:
    cfg: ScenarioConfig = world.cfg
    return [TaskSpec(cfg.block_bits, cfg.cycles_per_bit, v.tau_max_s) for v in world.vues]
