import numpy as np
import pytest

from droadmap import env, scenarios


@pytest.fixture(scope="session")
def open_map():
    return env.load_map(scenarios.open_square(64), resolution=0.05, name="open")


@pytest.fixture(scope="session")
def corridor_map():
    return env.load_map(scenarios.corridor_map(160), resolution=0.05, name="corridor")


@pytest.fixture(scope="session")
def circle_map():
    return env.load_map(scenarios.circle_map(160), resolution=0.05, name="circle")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
