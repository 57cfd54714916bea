import numpy as np
import pytest

from trflow import ambient as amb
from trflow.immersion import TorusGrid, make_immersion


@pytest.fixture(scope='session')
def flat2():
    return amb.flat_model(2)


@pytest.fixture(scope='session')
def torus2():
    return amb.flat_torus_model(2)


@pytest.fixture(scope='session')
def ch2():
    return amb.builtin_kahler_model('complex-hyperbolic', 2)


@pytest.fixture(scope='session')
def fs2():
    return amb.builtin_kahler_model('fubini-study-chart', 2)


@pytest.fixture(scope='session')
def bump_pair():
    return amb.almost_kahler_model_from_pair(
        amb.bump_metric_field(2, eps=0.1, width=2.0), 2, h_amb=1e-3)


@pytest.fixture(scope='session')
def bump_kahler():
    return amb.builtin_kahler_model('flat-plus-bump', 2, eps=0.01,
                                    center=(1.0, 0.0, 1.0, 0.0), width=1.6)


def grid(n=2, res=32):
    return TorusGrid(n, (res,) * n)


@pytest.fixture
def clifford32():
    return make_immersion('flat-clifford', grid())


@pytest.fixture
def sheared32():
    return make_immersion('flat-sheared', grid(), delta=0.2)


def ball_points(rng, count, radius=0.5, dim=4):
    pts = rng.normal(size=(4 * count, dim))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    radii = radius * rng.uniform(0, 1, size=(4 * count, 1)) ** (1.0 / dim)
    return (pts * radii)[:count]
