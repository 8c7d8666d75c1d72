import numpy as np
import pytest
from hypothesis import settings

from nordfluid.field import Grid
from nordfluid.state import CANONICAL_STATE, background_solve

settings.register_profile("nordfluid", max_examples=60, deadline=None)
settings.load_profile("nordfluid")


@pytest.fixture(scope="session")
def background():
    return background_solve(None, 1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def grid():
    return Grid(1, 512, 8.0)


@pytest.fixture
def star():
    return CANONICAL_STATE.to_array()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
