import numpy as np
import pytest

from girthkit.bvh import build_bvh
from girthkit.synth import gen_cube, gen_cylinder


@pytest.fixture(scope="session")
def cube15():
    return gen_cube(15.0)


@pytest.fixture(scope="session")
def cube15_bvh(cube15):
    return build_bvh(cube15)


@pytest.fixture(scope="session")
def cyl_25_50():
    return gen_cylinder(25.0, 50.0, segments=256)


@pytest.fixture(scope="session")
def cyl_25_50_bvh(cyl_25_50):
    return build_bvh(cyl_25_50)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
