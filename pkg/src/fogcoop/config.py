"""Scenario / radio / training configuration and the INI config file loader.

All physical quantities are SI internally: meters, seconds, hertz, watts,
bits, CPU cycles. Metrics files report latencies in milliseconds.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; carries the offending section/field."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass
class ScenarioConfig:
    """World geometry, traffic, task and message-value parameters."""

    road_length_m: float = 1000.0
    num_blocks: int = 100
    num_vues: int = 6
    num_faps: int = 1
    num_rrhs: int = 2
    # Forward perception length each task must cover.
    d_exp_m: float = 300.0
    block_bits: float = 6400.0
    cycles_per_bit: float = 130.0
    tau_max_min_s: float = 0.10
    tau_max_max_s: float = 0.15
    # Message value hits zero this long after generation.
    tau_dll_s: float = 1.0
    # Temporal-value chain: levels uniformly spaced in [0, 1].
    value_levels: int = 5
    value_p_up: float = 0.10
    value_p_down: float = 0.50
    value_p_regen: float = 0.20
    value_init: str = "top"  # "top" or "random"
    steps_per_episode: int = 25
    step_duration_s: float = 0.1
    sensing_radius_m: float = 50.0
    vue_speed_min_mps: float = 15.0
    vue_speed_max_mps: float = 25.0
    vue_power_w: float = 0.1
    fap_positions_m: tuple[float, ...] = (500.0,)
    fap_coverage_radius_m: float = 350.0
    fap_fmax_hz: float = 10e9
    cloud_fmax_hz: float = 30e9
    rrh_positions_m: tuple[float, ...] = (250.0, 750.0)

    def validate(self) -> None:
        if self.road_length_m <= 0:
            raise ConfigError("scenario.road_length_m", "must be positive")
        if self.num_blocks < 1:
            raise ConfigError("scenario.num_blocks", "must be at least 1")
        if self.num_vues < 1:
            raise ConfigError("scenario.num_vues", "must be at least 1")
        if self.d_exp_m <= 0 or self.d_exp_m > self.road_length_m:
            raise ConfigError("scenario.d_exp_m", "must lie in (0, road_length_m]")
        if self.value_levels < 2:
            raise ConfigError("scenario.value_levels", "needs at least 2 levels")
        if self.value_init not in ("top", "random"):
            raise ConfigError("scenario.value_init", "must be 'top' or 'random'")
        p_stay = 1.0 - self.value_p_up - self.value_p_down - self.value_p_regen
        if min(self.value_p_up, self.value_p_down, self.value_p_regen) < 0 or p_stay < -1e-12:
            raise ConfigError("scenario.value_p_*", "probabilities must be >= 0 and sum to <= 1")
        if not (0 < self.tau_max_min_s <= self.tau_max_max_s):
            raise ConfigError("scenario.tau_max_min_s", "need 0 < min <= max")
        if len(self.fap_positions_m) != self.num_faps:
            raise ConfigError("scenario.fap_positions_m",
                              f"expected {self.num_faps} positions, got {len(self.fap_positions_m)}")
        if len(self.rrh_positions_m) != self.num_rrhs:
            raise ConfigError("scenario.rrh_positions_m",
                              f"expected {self.num_rrhs} positions, got {len(self.rrh_positions_m)}")
        for name in ("block_bits", "cycles_per_bit", "tau_dll_s", "step_duration_s",
                     "sensing_radius_m", "vue_power_w", "fap_coverage_radius_m",
                     "fap_fmax_hz", "cloud_fmax_hz"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"scenario.{name}", "must be positive")

    @property
    def block_spacing_m(self) -> float:
        return self.road_length_m / self.num_blocks


@dataclass
class RadioConfig:
    """Uplink channel and resource-block parameters."""

    total_bandwidth_hz: float = 15e6
    rb_bandwidth_hz: float = 1.5e6
    noise_power_w: float = 4.7e-14
    fronthaul_delay_s: float = 0.012
    pathloss_exponent: float = 3.0
    pathloss_ref_db: float = 30.0  # path loss at 1 m
    rrh_cluster_size: int = 2
    fading: bool = True

    @property
    def num_rbs(self) -> int:
        # RB count follows from slicing the total bandwidth.
        return int(self.total_bandwidth_hz // self.rb_bandwidth_hz)

    def validate(self, num_rrhs: int) -> None:
        if self.rb_bandwidth_hz <= 0 or self.total_bandwidth_hz <= 0:
            raise ConfigError("radio.rb_bandwidth_hz", "bandwidths must be positive")
        if self.num_rbs < 1:
            raise ConfigError("radio.total_bandwidth_hz",
                              "total bandwidth must fit at least one RB")
        if self.noise_power_w <= 0:
            raise ConfigError("radio.noise_power_w", "must be positive")
        if self.fronthaul_delay_s < 0:
            raise ConfigError("radio.fronthaul_delay_s", "must be >= 0")
        if not (1 <= self.rrh_cluster_size <= num_rrhs):
            raise ConfigError("radio.rrh_cluster_size",
                              f"must be in [1, {num_rrhs}]")


@dataclass
class SatisfactionWeights:
    """Weights of the message-value and latency terms plus the learning penalty."""

    value_weight: float = 1.0        # multiplies summed message values
    latency_weight: float = 50.0     # per second of latency slack
    penalty_scale: float = 1.0       # scales the per-violation learning penalty

    def validate(self) -> None:
        if self.value_weight < 0 or self.latency_weight < 0:
            raise ConfigError("satisfaction.value_weight", "weights must be >= 0")
        if self.penalty_scale < 0:
            raise ConfigError("satisfaction.penalty_scale", "must be >= 0")


@dataclass
class TrainConfig:
    """Hyperparameters of the multi-agent learner."""

    episodes: int = 250
    discount: float = 0.95
    buffer_capacity: int = 100_000
    batch_size: int = 128
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    soft_update_rate: float = 0.01
    # Rewards are multiplied by this inside the critic targets only; raw
    # rewards reach the metrics untouched.
    reward_scale: float = 0.05
    noise_initial: float = 0.4
    noise_final: float = 0.0
    noise_decay_fraction: float = 0.8  # fraction of episodes over which noise anneals
    warmup_transitions: int = 300
    actor_hidden: tuple[int, ...] = (64, 64)
    embed_hidden: tuple[int, ...] = (64,)
    embed_dim: int = 32
    attn_key_dim: int = 16
    attn_value_dim: int = 32
    head_hidden: tuple[int, ...] = (64,)
    shared_embeddings: bool = True
    # "target": next actions from target actors; "stored": replay the executed ones.
    next_action_source: str = "target"
    checkpoint_every: int = 0  # episodes between checkpoints; 0 = final only

    def validate(self) -> None:
        if self.episodes < 1:
            raise ConfigError("training.episodes", "must be at least 1")
        if not (0 <= self.discount < 1):
            raise ConfigError("training.discount", "must lie in [0, 1)")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ConfigError("training.batch_size",
                              "need 1 <= batch_size <= buffer_capacity")
        if not (0 < self.soft_update_rate <= 1):
            raise ConfigError("training.soft_update_rate", "must lie in (0, 1]")
        if self.next_action_source not in ("target", "stored"):
            raise ConfigError("training.next_action_source", "must be 'target' or 'stored'")
        if not (0 <= self.noise_decay_fraction <= 1):
            raise ConfigError("training.noise_decay_fraction", "must lie in [0, 1]")


@dataclass
class SweepConfig:
    """Axes of the experiment sweep."""

    num_vues: tuple[int, ...] = (6, 8, 10, 12)
    d_exp_m: tuple[float, ...] = (150.0, 300.0, 500.0)
    seeds: int = 3
    schemes: tuple[str, ...] = ("distance-full", "max-sum-rate")
    episodes_per_cell: int = 4

    def validate(self) -> None:
        known = {"proposed", "distance-full", "max-sum-rate", "random"}
        for s in self.schemes:
            if s not in known:
                raise ConfigError("sweep.schemes", f"unknown scheme '{s}'")
        if self.seeds < 1:
            raise ConfigError("sweep.seeds", "must be at least 1")


@dataclass
class ExperimentConfig:
    """Root config: one 64-bit seed drives every random stream."""

    seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    weights: SatisfactionWeights = field(default_factory=SatisfactionWeights)
    training: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> None:
        if not (0 <= self.seed < 2**64):
            raise ConfigError("experiment.seed", "must be an unsigned 64-bit integer")
        self.scenario.validate()
        self.radio.validate(self.scenario.num_rrhs)
        self.weights.validate()
        self.training.validate()
        self.sweep.validate()

    def with_overrides(self, seed: int | None = None, num_vues: int | None = None,
                       d_exp_m: float | None = None) -> "ExperimentConfig":
        cfg = replace(self)
        if seed is not None:
            cfg.seed = seed
        scen = replace(cfg.scenario)
        if num_vues is not None:
            scen.num_vues = num_vues
        if d_exp_m is not None:
            scen.d_exp_m = d_exp_m
        cfg.scenario = scen
        return cfg

    def resolved(self) -> dict:
        """Plain-dict view of every field, for run manifests."""
        out: dict = {"seed": self.seed}
        for section in ("scenario", "radio", "weights", "training", "sweep"):
            obj = getattr(self, section)
            out[section] = {f.name: _plain(getattr(obj, f.name)) for f in fields(obj)}
        return out


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


_SECTION_MAP = {
    "scenario": ScenarioConfig,
    "radio": RadioConfig,
    "satisfaction": SatisfactionWeights,
    "training": TrainConfig,
    "sweep": SweepConfig,
}
_SECTION_ATTR = {
    "scenario": "scenario",
    "radio": "radio",
    "satisfaction": "weights",
    "training": "training",
    "sweep": "sweep",
}


def _parse_value(section: str, name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError("expected a boolean")
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = raw.replace(",", " ").split()
            elem = default[0] if default else 0.0
            if isinstance(elem, str):
                return tuple(parts)
            if isinstance(elem, int):
                return tuple(int(p) for p in parts)
            return tuple(float(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{section}.{name}", f"cannot parse {raw!r}: {exc}") from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Load an ExperimentConfig from an INI-style file and validate it."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    parser.read(path)

    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "experiment":
            continue
        if section not in _SECTION_MAP:
            raise ConfigError(section, "unknown config section")
        target = getattr(cfg, _SECTION_ATTR[section])
        known = {f.name: getattr(target, f.name) for f in fields(target)}
        for name, raw in parser.items(section):
            if name not in known:
                raise ConfigError(f"{section}.{name}", "unknown field")
            setattr(target, name, _parse_value(section, name, raw, known[name]))

    if parser.has_section("experiment"):
        for name, raw in parser.items("experiment"):
            if name != "seed":
                raise ConfigError(f"experiment.{name}", "unknown field")
            cfg.seed = _parse_value("experiment", "seed", raw, 0)

    cfg.validate()
    return cfg
