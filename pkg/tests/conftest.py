import numpy as np
import pytest

from isac_lab.scenario import ScenarioConfig


@pytest.fixture
def cfg():
    return ScenarioConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cn(rng, n, size=None):
    shape = (n,) if size is None else (size, n)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
