import numpy as np
import pytest

import ionphonon as ip

# The four reference parameter points used throughout (beta_x, v_b).
PARAM_POINTS = [(0.02, -0.1), (0.02, -0.2), (0.04, -0.1), (0.04, -0.2)]


@pytest.fixture(scope="session")
def torus11():
    lat = ip.build_lattice("torus", 1, 1)
    return lat, ip.coulomb_coupling(lat, 12.0)


@pytest.fixture(scope="session")
def torus11_armchair():
    lat = ip.build_lattice("torus", 1, 1, "armchair")
    return lat, ip.coulomb_coupling(lat, 12.0)


@pytest.fixture(scope="session")
def small_plane():
    lat = ip.build_lattice("plane", 6, 5)
    return lat, ip.coulomb_coupling(lat, 12.0)


@pytest.fixture(scope="session")
def plane_384_armchair():
    lat = ip.build_lattice("plane", 16, 12, "armchair")
    return lat, ip.coulomb_coupling(lat, 12.0)


@pytest.fixture(scope="session")
def cylinder_400():
    lat = ip.build_lattice("cylinder", 20, 10, "armchair")
    return lat, ip.coulomb_coupling(lat, 12.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
