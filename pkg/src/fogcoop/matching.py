"""RB allocation inside one cooperative cluster.

VUEs and RBs build preference lists from interference-free rates, a
deferred-acceptance pass produces the initial one-to-one matching, and
matched pairs then exchange RBs while the exchange strictly lowers the
cluster's bottleneck upload latency (evaluated with the interference the
other clusters actually create). An exhaustive enumerator over all
injective assignments serves as the optimality oracle for small cases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .allocation import Allocation, cluster_of
from .config import RadioConfig
from .radio import CLOUD, ChannelState, rates_on_all_rbs
from .world import World

MAX_SWAP_ITERATIONS = 500


class OracleTooLargeError(ValueError):
    """Exhaustive search refused: instance exceeds the size cap."""


@dataclass
class Matching:
    """Partial one-to-one VUE <-> RB assignment."""

    rb_of: dict[int, int] = field(default_factory=dict)
    vue_of: dict[int, int] = field(default_factory=dict)
    unmatched: list[int] = field(default_factory=list)

    def match(self, vue: int, rb: int) -> None:
        self.rb_of[vue] = rb
        self.vue_of[rb] = vue

    def swap(self, k1: int, k2: int) -> None:
        s1, s2 = self.rb_of[k1], self.rb_of[k2]
        self.match(k1, s2)
        self.match(k2, s1)

    def validate(self) -> None:
        for vue, rb in self.rb_of.items():
            assert self.vue_of[rb] == vue
        for rb, vue in self.vue_of.items():
            assert self.rb_of[vue] == rb
        assert len(set(self.rb_of.values())) == len(self.rb_of)


@dataclass
class ClusterProblem:
    """One cluster's uploaders and their per-RB rate/latency tables.

    `free_rates` ignores all interference (used for preference lists);
    `rates` fixes the other clusters' transmissions as background. Both are
    (uploaders, RBs). Cluster members never share an RB, so every table
    entry is independent of how this cluster itself is assigned.
    """

    node: int
    uploaders: list[int]
    bits: np.ndarray
    fronthaul: np.ndarray
    free_rates: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.index = {k: i for i, k in enumerate(self.uploaders)}
        self.free_terms = latency_terms(self.free_rates, self.bits, self.fronthaul)
        self.terms = latency_terms(self.rates, self.bits, self.fronthaul)

    def bottleneck(self, matching: Matching) -> float:
        """Cluster upload latency under a matching (inf if someone is left out)."""
        worst = 0.0
        for k in self.uploaders:
            if k not in matching.rb_of:
                return float("inf")
            worst = max(worst, float(self.terms[self.index[k], matching.rb_of[k]]))
        return worst


def build_cluster_problem(node: int, alloc: Allocation, channels: ChannelState,
                          world: World, rcfg: RadioConfig,
                          rrh_sets: list[np.ndarray] | None = None) -> ClusterProblem:
    """Tables for the node's uploading VUEs, other clusters held fixed."""
    members = cluster_of(node, alloc)
    powers = np.array([v.power_w for v in world.vues])
    uploaders = [k for k in members if alloc.blocks[k].sum() > 0]
    background = alloc.rbs.copy()
    for k in members:
        background[k, :] = 0
    num_rbs = rcfg.num_rbs
    if not uploaders:
        empty = np.zeros((0, num_rbs))
        return ClusterProblem(node, [], np.zeros(0), np.zeros(0), empty, empty)
    quiet = np.zeros_like(background)
    ids = [None if rrh_sets is None else rrh_sets[k] for k in uploaders]
    free = np.stack([rates_on_all_rbs(k, node, quiet, channels, powers, rcfg,
                                      world, rrh_ids=i)
                     for k, i in zip(uploaders, ids)])
    ext = np.stack([rates_on_all_rbs(k, node, background, channels, powers, rcfg,
                                     world, rrh_ids=i)
                    for k, i in zip(uploaders, ids)])
    bits = np.array([float(alloc.blocks[k].sum()) * world.cfg.block_bits
                     for k in uploaders])
    fronthaul = np.full(len(uploaders),
                        rcfg.fronthaul_delay_s if node == CLOUD else 0.0)
    return ClusterProblem(node, uploaders, bits, fronthaul, free, ext)


def latency_terms(rate_table: np.ndarray, bits: np.ndarray,
                  fronthaul_s: np.ndarray) -> np.ndarray:
    """Per-(VUE, RB) upload latency table."""
    with np.errstate(divide="ignore"):
        terms = bits[:, None] / rate_table + fronthaul_s[:, None]
    terms[rate_table <= 0.0] = np.inf
    return terms


def vue_utility(k: int, s: int, problem: ClusterProblem) -> float:
    """A VUE ranks RBs by the rate it would get on them."""
    return float(problem.free_rates[problem.index[k], s])


def rb_utility(s: int, k: int, problem: ClusterProblem) -> float:
    """The upload latency VUE k would contribute on RB s (RBs prefer small)."""
    return float(problem.free_terms[problem.index[k], s])


def preference_lists(problem: ClusterProblem) -> tuple[dict[int, list[int]],
                                                       dict[int, dict[int, int]]]:
    """VUE lists (best RB first) and RB ranks (lower = preferred)."""
    num_rbs = problem.free_rates.shape[1]
    vue_prefs = {}
    for k in problem.uploaders:
        order = np.lexsort((np.arange(num_rbs), -problem.free_rates[problem.index[k]]))
        vue_prefs[k] = [int(s) for s in order]
    rb_rank = {}
    for s in range(num_rbs):
        order = sorted(problem.uploaders,
                       key=lambda k: (problem.free_terms[problem.index[k], s], k))
        rb_rank[s] = {k: r for r, k in enumerate(order)}
    return vue_prefs, rb_rank


def deferred_acceptance(vue_prefs: dict[int, list[int]],
                        rb_rank: dict[int, dict[int, int]]) -> Matching:
    """Proposal rounds: each RB keeps the best proposer it has seen."""
    next_choice = {k: 0 for k in vue_prefs}
    held: dict[int, int] = {}
    while True:
        open_vues = sorted(set(vue_prefs) - set(held.values()))
        proposals: dict[int, list[int]] = {}
        for k in open_vues:
            prefs = vue_prefs[k]
            if next_choice[k] < len(prefs):
                proposals.setdefault(prefs[next_choice[k]], []).append(k)
        if not proposals:
            break
        for s in sorted(proposals):
            cands = proposals[s]
            if s in held:
                cands.append(held[s])
            best = min(cands, key=lambda k: (rb_rank[s][k], k))
            for k in cands:
                if k != best:
                    next_choice[k] += 1
            held[s] = best
    matching = Matching()
    for s, k in sorted(held.items()):
        matching.match(k, s)
    matching.unmatched = sorted(set(vue_prefs) - set(held.values()))
    return matching


def find_improving_swap(matching: Matching,
                        problem: ClusterProblem) -> tuple[int, int] | None:
    """First matched pair (lexicographic) whose RB exchange strictly
    lowers the cluster's maximum upload latency."""
    terms, index = problem.terms, problem.index
    matched = sorted(matching.rb_of)
    cur = {k: float(terms[index[k], matching.rb_of[k]]) for k in matched}
    base = list(cur.values()) + ([np.inf] if matching.unmatched else [])
    cur_max = max(base, default=0.0)
    if not np.isfinite(cur_max):
        return None
    for i, k1 in enumerate(matched):
        for k2 in matched[i + 1:]:
            new1 = float(terms[index[k1], matching.rb_of[k2]])
            new2 = float(terms[index[k2], matching.rb_of[k1]])
            rest = max((cur[k] for k in matched if k not in (k1, k2)), default=0.0)
            if max(rest, new1, new2) < cur_max:
                return (k1, k2)
    return None


def find_sum_rate_swap(matching: Matching,
                       problem: ClusterProblem) -> tuple[int, int] | None:
    """Baseline criterion: swap when it strictly raises the cluster sum rate."""
    rates, index = problem.rates, problem.index
    matched = sorted(matching.rb_of)
    for i, k1 in enumerate(matched):
        for k2 in matched[i + 1:]:
            s1, s2 = matching.rb_of[k1], matching.rb_of[k2]
            old = rates[index[k1], s1] + rates[index[k2], s2]
            new = rates[index[k1], s2] + rates[index[k2], s1]
            if new > old:
                return (k1, k2)
    return None


def swap_matching(node: int, alloc: Allocation, channels: ChannelState,
                  world: World, rcfg: RadioConfig,
                  criterion: str = "bottleneck",
                  rrh_sets: list[np.ndarray] | None = None) -> tuple[Matching, int]:
    """Allocate RBs to the node's uploading VUEs and locally optimize.

    Only VUEs with selected blocks compete for RBs. The allocation's RB
    rows for this cluster are rewritten in place; rows of other clusters
    are the fixed interference background. Returns the matching and the
    number of accepted swaps.
    """
    members = cluster_of(node, alloc)
    for k in members:
        alloc.rbs[k, :] = 0
    problem = build_cluster_problem(node, alloc, channels, world, rcfg, rrh_sets)
    if not problem.uploaders:
        return Matching(), 0

    vue_prefs, rb_rank = preference_lists(problem)
    matching = deferred_acceptance(vue_prefs, rb_rank)

    if criterion == "bottleneck":
        find = find_improving_swap
    elif criterion == "sum-rate":
        find = find_sum_rate_swap
    else:
        raise ValueError(f"unknown swap criterion {criterion!r}")

    iterations = 0
    while (pair := find(matching, problem)) is not None:
        matching.swap(*pair)
        iterations += 1
        if iterations > MAX_SWAP_ITERATIONS:
            raise RuntimeError("swap matching failed to terminate")
    _write_rbs(matching, alloc)
    return matching, iterations


def _write_rbs(matching: Matching, alloc: Allocation) -> None:
    for k, s in matching.rb_of.items():
        alloc.rbs[k, :] = 0
        alloc.rbs[k, s] = 1


def exhaustive_rb_search(problem: ClusterProblem,
                         cap: int = 8) -> tuple[Matching, float]:
    """Minimum-bottleneck assignment by enumerating all injective maps."""
    m = len(problem.uploaders)
    num_rbs = problem.terms.shape[1]
    if m > cap or num_rbs > cap:
        raise OracleTooLargeError(f"instance {m}x{num_rbs} exceeds cap {cap}")
    if m > num_rbs:
        raise OracleTooLargeError("more uploaders than RBs")
    matching = Matching()
    if m == 0:
        return matching, 0.0
    perms = np.array(list(permutations(range(num_rbs), m)))
    values = problem.terms[np.arange(m)[None, :], perms].max(axis=1)
    best = int(np.argmin(values))
    for i, k in enumerate(problem.uploaders):
        matching.match(k, int(perms[best, i]))
    return matching, float(values[best])
