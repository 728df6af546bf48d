import numpy as np
import pytest

from pfcocycle import grassmann, maps, spectral, transfer


@pytest.fixture(scope="session")
def class_params():
    return maps.LyClassParams(k=2, alpha=0.5, K=10.0)


@pytest.fixture(scope="session")
def two_maps():
    """Two degree-3 maps comfortably inside the k=2, alpha=0.5, K=10 class."""
    return (
        maps.CircleMap(3, ((1, 0.05, 0.0),)),
        maps.CircleMap(3, ((2, 0.03, 1.0),)),
    )


@pytest.fixture(scope="session")
def saks2():
    return spectral.SaksStructure(2)


@pytest.fixture(scope="session")
def two_fiber(two_maps, saks2):
    """Assembled, Cesaro-damped two-fiber cocycle at order 8 with its path."""
    n = 8
    mats = {
        "t1": transfer.fejer_weight(transfer.assemble(two_maps[0], n, map_id="t1")).entries,
        "t2": transfer.fejer_weight(transfer.assemble(two_maps[1], n, map_id="t2")).entries,
    }
    driver = transfer.Driver(kind="iid", fibers=("t1", "t2"), seed=11, weights=(0.5, 0.5))
    path = transfer.sample_path(driver, 400, 2600)
    weights = saks2.strong.weights(n)
    return mats, path, weights


def random_subspace(rng, dim, d, weights=None):
    g = rng.normal(size=(dim, d)) + 1j * rng.normal(size=(dim, d))
    return grassmann.Subspace.from_spanning(g, weights=weights)


def random_matrix(rng, dim):
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
