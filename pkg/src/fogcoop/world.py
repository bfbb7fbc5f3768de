"""Road world: vehicles, infrastructure, block messages and their values.

The road is a 1-D strip partitioned into equal blocks. Vehicles move at
constant speed along the road axis and wrap around at the ends. Each
(vehicle, block) message carries a temporal value evolving on a finite
Markov chain; spatial value decays linearly with projected distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig


class NotCoveredError(ValueError):
    """Raised when a sojourn time is requested outside the F-AP's coverage."""


@dataclass
class Vue:
    """A vehicle: position on the road, signed speed, task deadline."""

    id: int
    position: np.ndarray          # (x, y) meters
    velocity: float               # signed speed along the road axis, m/s
    power_w: float
    tau_max_s: float
    sensing_radius_m: float

    @property
    def heading(self) -> np.ndarray:
        direction = 1.0 if self.velocity >= 0 else -1.0
        return np.array([direction, 0.0])

    @property
    def speed(self) -> float:
        return abs(self.velocity)


@dataclass
class InfraNode:
    """Cloud server, fog access point, or remote radio head."""

    kind: str                     # "cloud" | "fap" | "rrh"
    id: int
    position: np.ndarray | None = None
    fmax_hz: float = 0.0
    coverage_radius_m: float = 0.0


@dataclass
class TemporalValueChain:
    """Finite-state value chain shared by all (vehicle, block) messages.

    `levels` are the admissible values, `transition` the row-stochastic
    step matrix, `state` the current level index of every message.
    """

    levels: np.ndarray            # (Z,)
    transition: np.ndarray        # (Z, Z), rows sum to 1
    state: np.ndarray             # (K, B) level indices
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rowsums = self.transition.sum(axis=1)
        if not np.allclose(rowsums, 1.0, atol=1e-9):
            raise ValueError("transition matrix rows must sum to 1")
        if np.any(self.levels < 0):
            raise ValueError("value levels must be nonnegative")
        self._cum = np.cumsum(self.transition, axis=1)

    def values(self) -> np.ndarray:
        """Current temporal value of every message, shape (K, B)."""
        return self.levels[self.state]

    def step(self, rng: np.random.Generator) -> None:
        """Advance every message one transition, in place."""
        u = rng.random(self.state.shape)
        self.state = (u[..., None] > self._cum[self.state]).sum(axis=-1)

    def stationary_distribution(self) -> np.ndarray:
        """Left eigenvector of the transition matrix for eigenvalue 1."""
        evals, evecs = np.linalg.eig(self.transition.T)
        idx = int(np.argmin(np.abs(evals - 1.0)))
        pi = np.real(evecs[:, idx])
        return pi / pi.sum()


def make_value_chain(cfg: ScenarioConfig, rng: np.random.Generator) -> TemporalValueChain:
    """Birth-death chain biased downward, with regeneration to the top level."""
    z = cfg.value_levels
    levels = np.linspace(0.0, 1.0, z)
    p_up, p_down, p_regen = cfg.value_p_up, cfg.value_p_down, cfg.value_p_regen
    trans = np.zeros((z, z))
    for i in range(z):
        trans[i, z - 1] += p_regen
        if i > 0:
            trans[i, i - 1] += p_down
        else:
            trans[i, i] += p_down  # decay at the bottom folds into staying
        if i < z - 1:
            trans[i, i + 1] += p_up
        else:
            trans[i, i] += p_up
        trans[i, i] += 1.0 - p_up - p_down - p_regen
    if cfg.value_init == "top":
        state = np.full((cfg.num_vues, cfg.num_blocks), z - 1, dtype=np.int64)
    else:
        state = rng.integers(0, z, size=(cfg.num_vues, cfg.num_blocks))
    return TemporalValueChain(levels=levels, transition=trans, state=state)


@dataclass
class World:
    """Full scenario state: layout is fixed, vehicles and values evolve."""

    cfg: ScenarioConfig
    vues: list[Vue]
    block_centers: np.ndarray     # (B, 2)
    faps: list[InfraNode]
    rrhs: list[InfraNode]
    cloud: InfraNode
    chain: TemporalValueChain

    @classmethod
    def generate(cls, cfg: ScenarioConfig, rng: np.random.Generator) -> "World":
        cfg.validate()
        spacing = cfg.block_spacing_m
        centers = np.stack([(np.arange(cfg.num_blocks) + 0.5) * spacing,
                            np.zeros(cfg.num_blocks)], axis=1)
        vues = []
        for k in range(cfg.num_vues):
            x = rng.uniform(0.0, cfg.road_length_m)
            speed = rng.uniform(cfg.vue_speed_min_mps, cfg.vue_speed_max_mps)
            direction = 1.0 if rng.random() < 0.5 else -1.0
            tau_max = rng.uniform(cfg.tau_max_min_s, cfg.tau_max_max_s)
            vues.append(Vue(id=k, position=np.array([x, 0.0]),
                            velocity=direction * speed, power_w=cfg.vue_power_w,
                            tau_max_s=tau_max, sensing_radius_m=cfg.sensing_radius_m))
        faps = [InfraNode("fap", n, np.array([x, 0.0]), cfg.fap_fmax_hz,
                          cfg.fap_coverage_radius_m)
                for n, x in enumerate(cfg.fap_positions_m)]
        rrhs = [InfraNode("rrh", m, np.array([x, 0.0]))
                for m, x in enumerate(cfg.rrh_positions_m)]
        cloud = InfraNode("cloud", 0, None, cfg.cloud_fmax_hz)
        chain = make_value_chain(cfg, rng)
        return cls(cfg=cfg, vues=vues, block_centers=centers, faps=faps,
                   rrhs=rrhs, cloud=cloud, chain=chain)

    # ------------------------------------------------------------------
    # mobility
    # ------------------------------------------------------------------

    def advance_mobility(self, dt: float) -> None:
        """Constant-velocity motion with wraparound at the road ends."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        for vue in self.vues:
            vue.position[0] = (vue.position[0] + vue.velocity * dt) % self.cfg.road_length_m

    def sojourn_time(self, k: int, fap_id: int) -> float:
        """Time until VUE k's straight-line path exits F-AP coverage."""
        vue = self.vues[k]
        fap = self.faps[fap_id]
        offset = vue.position - fap.position
        r = fap.coverage_radius_m
        inside = offset @ offset <= r * r
        if not inside:
            raise NotCoveredError(f"vue {k} outside coverage of fap {fap_id}")
        if vue.speed == 0.0:
            return float("inf")
        u = vue.heading * vue.speed
        # |offset + u t|^2 = r^2, take the positive root.
        a = u @ u
        b = offset @ u
        c = offset @ offset - r * r
        return float((-b + np.sqrt(b * b - a * c)) / a)

    # ------------------------------------------------------------------
    # block geometry
    # ------------------------------------------------------------------

    def sensed_blocks(self, k: int) -> np.ndarray:
        """Ids of blocks whose center lies within the sensing radius."""
        d = np.linalg.norm(self.block_centers - self.vues[k].position, axis=1)
        return np.flatnonzero(d <= self.vues[k].sensing_radius_m)

    def sensing_window(self, k: int) -> np.ndarray:
        """Fixed-length window of candidate block ids around VUE k.

        Entries are -1 where the window extends past the road or the block
        center falls outside the sensing radius; valid entries are exactly
        sensed_blocks(k). The fixed length gives agents stable vector shapes.
        """
        slots = self.num_sensing_slots()
        half = slots // 2
        x = self.vues[k].position[0]
        center = int(np.clip(x // self.cfg.block_spacing_m, 0, self.cfg.num_blocks - 1))
        ids = np.arange(center - half, center + half + 1)
        valid = (ids >= 0) & (ids < self.cfg.num_blocks)
        out = np.where(valid, ids, -1)
        dist = np.abs(self.block_centers[np.clip(ids, 0, self.cfg.num_blocks - 1), 0] - x)
        out[dist > self.vues[k].sensing_radius_m] = -1
        return out

    def num_sensing_slots(self) -> int:
        half = int(self.cfg.sensing_radius_m / self.cfg.block_spacing_m + 0.5)
        return 2 * half + 1

    def region_blocks(self, k: int) -> np.ndarray:
        """Blocks in VUE k's forward strip, up to the perception length."""
        vue = self.vues[k]
        forward = (self.block_centers - vue.position) @ vue.heading
        return np.flatnonzero((forward >= 0.0) & (forward <= self.cfg.d_exp_m))

    # ------------------------------------------------------------------
    # message values
    # ------------------------------------------------------------------

    def spatial_value(self, k: int, block_id: int) -> float:
        return float(self.spatial_values(k, np.array([block_id]))[0])

    def spatial_values(self, k: int, block_ids: np.ndarray) -> np.ndarray:
        """Linear relevance of blocks for VUE k, clamped to [0, 1]."""
        vue = self.vues[k]
        projected = np.abs((self.block_centers[block_ids] - vue.position) @ vue.heading)
        return np.clip((self.cfg.d_exp_m - projected) / self.cfg.d_exp_m, 0.0, 1.0)

    def message_value(self, k: int, owner: int, block_id: int) -> float:
        """Spatial-temporal value of owner's block message for VUE k."""
        q = float(self.chain.values()[owner, block_id])
        return q * self.spatial_value(k, block_id)


def linear_temporal_value(q0: float, t0: float, t: float, deadline: float) -> float:
    """Reference value model: linear decay from q0 to 0 over `deadline` seconds."""
    if t < t0:
        raise ValueError("t must be >= t0")
    if q0 <= 0:
        raise ValueError("q0 must be positive")
    return max(0.0, q0 - (q0 / deadline) * (t - t0))
