import numpy as np
import pytest

from hardylab.geometry import DefiningFunction
from hardylab.mesh import build_mesh
from hardylab.transforms import CauchyOperator


@pytest.fixture(scope="session")
def ball():
    return DefiningFunction("ball")


@pytest.fixture(scope="session")
def perturbed():
    return DefiningFunction("perturbed-ball", eps=0.1)


@pytest.fixture(scope="session")
def ball_mesh(ball):
    return build_mesh(ball, (8, 16, 16))


@pytest.fixture(scope="session")
def perturbed_mesh(perturbed):
    return build_mesh(perturbed, (8, 16, 16))


@pytest.fixture(scope="session")
def ball_op(ball_mesh):
    return CauchyOperator(ball_mesh)


@pytest.fixture(scope="session")
def perturbed_op(perturbed_mesh):
    return CauchyOperator(perturbed_mesh)


@pytest.fixture(scope="session")
def circle_mesh():
    return build_mesh(DefiningFunction("ball", n=1), (256,))


def random_unit(rng, n, size=None):
    shape = (2 * n,) if size is None else (size, 2 * n)
    x = rng.normal(size=shape)
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    return x[..., 0::2] + 1j * x[..., 1::2]
