"""Uplink channel sampling and rate computation for both offloading modes.

Channels follow log-distance path loss with unit-variance complex block
fading, redrawn every step and RB. All co-RB transmitters interfere at
every receiver (full frequency reuse). Cloud reception combines the
serving RRH cluster with an MMSE detector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RadioConfig
from .world import World

CLOUD = 0  # mode index of the cloud server; F-AP n is mode n + 1


@dataclass
class ChannelState:
    """Complex gains for one time step: VUE -> F-AP and VUE -> RRH links."""

    h_fap: np.ndarray    # (K, N, S)
    h_cloud: np.ndarray  # (K, M, S)
    t: int


def pathloss_gain(distance_m: np.ndarray | float, rcfg: RadioConfig):
    """Linear power gain at the given distance (clamped below 1 m)."""
    d = np.maximum(distance_m, 1.0)
    loss_db = rcfg.pathloss_ref_db + 10.0 * rcfg.pathloss_exponent * np.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def sample_channels(world: World, rcfg: RadioConfig, t: int,
                    rng: np.random.Generator) -> ChannelState:
    """Draw block-fading gains for every (VUE, receiver, RB) triple."""
    K = len(world.vues)
    S = rcfg.num_rbs
    vue_pos = np.stack([v.position for v in world.vues])
    fap_pos = np.stack([f.position for f in world.faps]) if world.faps else np.zeros((0, 2))
    rrh_pos = np.stack([r.position for r in world.rrhs]) if world.rrhs else np.zeros((0, 2))

    def links(node_pos: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(vue_pos[:, None, :] - node_pos[None, :, :], axis=2)
        amp = np.sqrt(pathloss_gain(d, rcfg))[:, :, None]
        shape = (K, node_pos.shape[0], S)
        if rcfg.fading:
            fade = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        else:
            fade = np.ones(shape, dtype=complex)
        return amp * fade

    return ChannelState(h_fap=links(fap_pos), h_cloud=links(rrh_pos), t=t)


def nearest_rrhs(k: int, world: World, cluster_size: int) -> np.ndarray:
    """Ids of the `cluster_size` RRHs closest to VUE k (ties: lower id)."""
    if cluster_size > len(world.rrhs):
        raise ValueError("cluster_size exceeds RRH count")
    pos = world.vues[k].position
    d = np.array([np.linalg.norm(r.position - pos) for r in world.rrhs])
    order = np.lexsort((np.arange(len(d)), d))
    return np.sort(order[:cluster_size])


def rate_fap(k: int, n: int, rb_assign: np.ndarray, channels: ChannelState,
             powers: np.ndarray, rcfg: RadioConfig) -> float:
    """Uplink rate of VUE k at F-AP n under the given RB assignment."""
    gains = np.abs(channels.h_fap[:, n, :]) ** 2        # (K, S)
    signal = powers[k] * gains[k]                       # (S,)
    total = (rb_assign * powers[:, None] * gains).sum(axis=0)
    interference = total - rb_assign[k] * signal
    sinr = signal / (interference + rcfg.noise_power_w)
    return float((rb_assign[k] * rcfg.rb_bandwidth_hz * np.log2(1.0 + sinr)).sum())


def mmse_detector(k: int, s: int, channels: ChannelState, rb_assign: np.ndarray,
                  powers: np.ndarray, rcfg: RadioConfig, rrh_ids: np.ndarray) -> np.ndarray:
    """MMSE combining vector for VUE k on RB s over its RRH cluster."""
    H = channels.h_cloud[:, rrh_ids, s]                 # (K, m)
    m = len(rrh_ids)
    active = np.flatnonzero(rb_assign[:, s])
    cov = rcfg.noise_power_w * np.eye(m, dtype=complex)
    for j in active:
        cov += powers[j] * np.outer(H[j], H[j].conj())
    return np.linalg.solve(cov, H[k])


def _cloud_sinr(k: int, s: int, channels: ChannelState, rb_assign: np.ndarray,
                powers: np.ndarray, rcfg: RadioConfig, rrh_ids: np.ndarray,
                detector: np.ndarray) -> float:
    H = channels.h_cloud[:, rrh_ids, s]
    g = detector
    signal = powers[k] * np.abs(g.conj() @ H[k]) ** 2
    interference = 0.0
    for j in np.flatnonzero(rb_assign[:, s]):
        if j != k:
            interference += powers[j] * np.abs(g.conj() @ H[j]) ** 2
    noise = rcfg.noise_power_w * float(np.real(g.conj() @ g))
    return float(signal / (interference + noise))


def rate_cloud(k: int, rb_assign: np.ndarray, channels: ChannelState,
               powers: np.ndarray, rcfg: RadioConfig, rrh_ids: np.ndarray) -> float:
    """Cloud-mode uplink rate of VUE k with MMSE combining over its cluster."""
    total = 0.0
    for s in np.flatnonzero(rb_assign[k]):
        g = mmse_detector(k, s, channels, rb_assign, powers, rcfg, rrh_ids)
        sinr = _cloud_sinr(k, s, channels, rb_assign, powers, rcfg, rrh_ids, g)
        total += rcfg.rb_bandwidth_hz * np.log2(1.0 + sinr)
    return float(total)


def detector_sinr(k: int, s: int, channels: ChannelState, rb_assign: np.ndarray,
                  powers: np.ndarray, rcfg: RadioConfig, rrh_ids: np.ndarray,
                  detector: np.ndarray) -> float:
    """SINR achieved by an arbitrary combining vector (for optimality checks)."""
    return _cloud_sinr(k, s, channels, rb_assign, powers, rcfg, rrh_ids, detector)


def uplink_rate(k: int, mode: int, rb_assign: np.ndarray, channels: ChannelState,
                powers: np.ndarray, rcfg: RadioConfig, world: World,
                rrh_ids: np.ndarray | None = None) -> float:
    """Rate of VUE k under its selected mode; 0 if it holds no RB."""
    if rb_assign[k].sum() == 0:
        return 0.0
    if mode == CLOUD:
        if rrh_ids is None:
            rrh_ids = nearest_rrhs(k, world, rcfg.rrh_cluster_size)
        return rate_cloud(k, rb_assign, channels, powers, rcfg, rrh_ids)
    return rate_fap(k, mode - 1, rb_assign, channels, powers, rcfg)


def rates_on_all_rbs(k: int, mode: int, rb_background: np.ndarray,
                     channels: ChannelState, powers: np.ndarray,
                     rcfg: RadioConfig, world: World,
                     rrh_ids: np.ndarray | None = None) -> np.ndarray:
    """Hypothetical rate of VUE k on each RB, holding other rows fixed.

    `rb_background` must have VUE k's row zeroed; interference on each RB
    then comes only from the fixed co-channel transmitters.
    """
    if mode == CLOUD:
        if rrh_ids is None:
            rrh_ids = nearest_rrhs(k, world, rcfg.rrh_cluster_size)
        return _cloud_rates_batched(k, rb_background, channels, powers, rcfg, rrh_ids)
    gains = np.abs(channels.h_fap[:, mode - 1, :]) ** 2          # (K, S)
    interference = (rb_background * powers[:, None] * gains).sum(axis=0)
    sinr = powers[k] * gains[k] / (interference + rcfg.noise_power_w)
    return rcfg.rb_bandwidth_hz * np.log2(1.0 + sinr)


def _cloud_rates_batched(k: int, rb_background: np.ndarray, channels: ChannelState,
                         powers: np.ndarray, rcfg: RadioConfig,
                         rrh_ids: np.ndarray) -> np.ndarray:
    """MMSE cloud rate of VUE k on every RB at once (stacked solves)."""
    H = channels.h_cloud[:, rrh_ids, :]                           # (K, m, S)
    m = len(rrh_ids)
    weights = rb_background * powers[:, None]                     # (K, S)
    cov = np.einsum("ks,kms,kns->smn", weights, H, H.conj())
    cov += powers[k] * np.einsum("ms,ns->smn", H[k], H[k].conj())
    cov[:, np.arange(m), np.arange(m)] += rcfg.noise_power_w
    g = np.linalg.solve(cov, H[k].T[:, :, None])[:, :, 0]         # (S, m)
    proj2 = np.abs(np.einsum("sm,kms->ks", g.conj(), H)) ** 2     # (K, S)
    signal = powers[k] * proj2[k]
    interference = (rb_background * powers[:, None] * proj2).sum(axis=0)
    noise = rcfg.noise_power_w * (np.abs(g) ** 2).sum(axis=1)
    sinr = signal / (interference + noise)
    return rcfg.rb_bandwidth_hz * np.log2(1.0 + sinr)
