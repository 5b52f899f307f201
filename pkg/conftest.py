"""
Shared pytest fixtures: tiny networks, a small labeled dataset on disk, and
an identity stand-in for a trained Generator.
"""

import numpy as np
import pytest

import config
from cgan import ArchConfig, Batch
from dataset import write_dataset
from geometry import Rectangle
from scenarios import ObstacleScenario, generate_scenario_set, rasterize, save_scenarios


class IdentityGenerator:
    """Maps every latent point to the same normalized joint point, whatever the mask."""

    def generate_batch(self, z, mask):
        return np.asarray(z, dtype=np.float64).reshape(-1, 2)


@pytest.fixture
def identity_generator():
    return IdentityGenerator()


@pytest.fixture
def small_arch():
    """Real mask shape, very narrow layers."""
    return ArchConfig(channels=(2, 2), cond_features=4, hidden=8)


@pytest.fixture
def tiny_arch():
    """8x6 masks for float64 gradient checks."""
    return ArchConfig(mask_shape=(8, 6), channels=(2, 2), cond_features=4, hidden=8)


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(7)
    b, m = 6, 4
    return Batch(
        real=rng.random((b, 2)),
        masks=(rng.random((b, 8, 6)) < 0.3).astype(np.float64),
        z=rng.random((b, 2)),
        collision=rng.random((m, 2)),
        collision_masks=(rng.random((m, 8, 6)) < 0.3).astype(np.float64),
    )


@pytest.fixture
def blocking_scenario():
    """A box straddling the +x axis near full reach; the stretched arm at theta1 ~ 0 hits it."""
    obstacles = [Rectangle(1.5, -0.1, 1.8, 0.1)]
    return ObstacleScenario(id=1, obstacles=obstacles, mask=rasterize(obstacles))


@pytest.fixture
def metadata():
    return config.artifact_metadata(0, config.default_settings())


@pytest.fixture
def small_scenarios():
    return generate_scenario_set(5, seed=0)


@pytest.fixture
def scenario_file(tmp_path, small_scenarios, metadata):
    path = tmp_path / "scenarios.json"
    save_scenarios(str(path), small_scenarios, 0, metadata)
    return path


@pytest.fixture
def small_dataset(tmp_path, small_scenarios, scenario_file, metadata):
    """Empty scenario plus five obstacle scenarios, five folds of one test scenario each."""
    return write_dataset(str(tmp_path / "data"), small_scenarios, str(scenario_file), 0, metadata,
                         n_folds=5, workers=1)


def pytest_addoption(parser):
    parser.addoption('--run-slow', action='store_true', default=False,
                     help='also run desk-scale training and benchmark tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale run taking minutes; needs --run-slow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--run-slow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --run-slow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)
