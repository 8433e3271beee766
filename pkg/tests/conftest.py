import numpy as np
import pytest

from magtube.geometry import make_flat_magnetic, make_sphere_magnetic

SEED = 20240811


@pytest.fixture(scope="session")
def flat_geo():
    """Unit field, unit mass-frequency plane: Btilde = B = 1."""
    return make_flat_magnetic(2, [[0.0, 1.0], [-1.0, 0.0]], 1.0)


@pytest.fixture(scope="session")
def flat_geo_heavy():
    """B = 1, mass_freq = 0.5, so Btilde = 2: separates B from Btilde."""
    return make_flat_magnetic(2, [[0.0, 1.0], [-1.0, 0.0]], 0.5)


@pytest.fixture(scope="session")
def flat_geo_free():
    """No magnetic field: the geodesic (straight line) case."""
    return make_flat_magnetic(2, [[0.0, 0.0], [0.0, 0.0]], 1.0)


@pytest.fixture(scope="session")
def sphere_geo():
    return make_sphere_magnetic(1.0, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(SEED)


def sample_flat(rng, m, xmax=0.8, pmax=1.2):
    return np.concatenate(
        [rng.uniform(-xmax, xmax, (m, 2)), rng.uniform(-pmax, pmax, (m, 2))], axis=1
    )


def sample_sphere(rng, m, umax=0.14, pmax=0.4):
    return np.concatenate(
        [rng.uniform(-umax, umax, (m, 2)), rng.uniform(-pmax, pmax, (m, 2))], axis=1
    )
