import numpy as np
import pytest

from fogcoop.config import ExperimentConfig, ScenarioConfig
from fogcoop.world import World


def build_world(rng_seed: int = 0, **scenario_overrides) -> World:
    """World with generated layout, then deterministic test overrides."""
    cfg = ScenarioConfig(**scenario_overrides)
    rng = np.random.default_rng(rng_seed)
    return World.generate(cfg, rng)


def place_vues(world: World, xs, velocities=None) -> None:
    """Pin VUE positions (and optionally velocities) for scripted cases."""
    for k, x in enumerate(xs):
        world.vues[k].position = np.array([float(x), 0.0])
        if velocities is not None:
            world.vues[k].velocity = float(velocities[k])


@pytest.fixture
def default_config() -> ExperimentConfig:
    cfg = ExperimentConfig(seed=1234)
    cfg.validate()
    return cfg
