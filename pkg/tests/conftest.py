import numpy as np
import pytest

from mvfuse import compute_scores, icosphere, make_camera_ring, rasterize


@pytest.fixture(scope="session")
def sphere():
    return icosphere(2)


@pytest.fixture(scope="session")
def ring(sphere):
    return make_camera_ring(5, resolution=(32, 32))


@pytest.fixture(scope="session")
def sphere_frags(sphere, ring):
    return [rasterize(sphere, cam) for cam in ring]


@pytest.fixture(scope="session")
def sphere_scores(sphere, ring, sphere_frags):
    return [
        compute_scores(sphere, cam, frag, 5.0)
        for cam, frag in zip(ring, sphere_frags)
    ]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
