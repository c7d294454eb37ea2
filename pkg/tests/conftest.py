import numpy as np
import pytest

from splatnav.baking import build_all_bodies
from splatnav.mapping import build_occupancy
from splatnav.planning import distance_transform
from splatnav.synthetic import make_apartment_small, make_sealed_box


@pytest.fixture(scope="session")
def apartment():
    return make_apartment_small()


@pytest.fixture(scope="session")
def apartment_bodies(apartment):
    return build_all_bodies(apartment)


@pytest.fixture(scope="session")
def apartment_grid(apartment, apartment_bodies):
    return build_occupancy(apartment, apartment_bodies)


@pytest.fixture(scope="session")
def apartment_clearance(apartment_grid):
    return distance_transform(apartment_grid)


@pytest.fixture(scope="session")
def sealed_box():
    return make_sealed_box()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
