import functools

import numpy as np
import pytest

from nondivdg.coefficients import get_domain
from nondivdg.mesh import mesh_sequence


@functools.lru_cache(maxsize=None)
def meshes(domain, h0=0.5, levels=3):
    return tuple(mesh_sequence(get_domain(domain), h0, levels))


@pytest.fixture(scope="session")
def disk_meshes():
    return meshes("disk")


@pytest.fixture(scope="session")
def square_meshes():
    return meshes("square")


@pytest.fixture(scope="session")
def keyhole_meshes():
    return meshes("keyhole", 0.5, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def square_bubble():
    """``x(1-x)y(1-y)``: degree 4, zero trace on the unit square."""
    from nondivdg.coefficients import ExactSolution

    def value(x):
        X, Y = x[..., 0], x[..., 1]
        return X * (1 - X) * Y * (1 - Y)

    def grad(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([(1 - 2 * X) * Y * (1 - Y), X * (1 - X) * (1 - 2 * Y)], -1)

    def hess(x):
        X, Y = x[..., 0], x[..., 1]
        xy = (1 - 2 * X) * (1 - 2 * Y)
        return np.stack([np.stack([-2 * Y * (1 - Y), xy], -1),
                         np.stack([xy, -2 * X * (1 - X)], -1)], -2)

    return ExactSolution(value, grad, hess)


def parabola():
    """``1 - x^2 - y^2``: zero on the unit circle."""
    from nondivdg.coefficients import ExactSolution
    return ExactSolution(lambda x: 1 - np.sum(x * x, -1), lambda x: -2 * x,
                         lambda x: np.broadcast_to(-2 * np.eye(2), x.shape + (2,)).copy())
