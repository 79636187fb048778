import numpy as np
import pytest

from acx.fields import BoxDomain, PolynomialMap, PolynomialScalar, block_structure, standard_structure
from acx.poly import Poly


def variables(dim):
    return [Poly.var(dim, i) for i in range(dim)]


@pytest.fixture
def x4():
    return variables(4)


@pytest.fixture
def x2():
    return variables(2)


@pytest.fixture
def jst2():
    return standard_structure(2)


@pytest.fixture
def jst1():
    return standard_structure(1)


@pytest.fixture
def unit_disc(x2):
    return BoxDomain(2, -1.1, 1.1, PolynomialScalar(x2[0] ** 2 + x2[1] ** 2 - 1))


@pytest.fixture
def ball(x4):
    return BoxDomain(4, -1.1, 1.1, PolynomialScalar(sum(v * v for v in x4) - 1))


@pytest.fixture
def diagonal(x4):
    x = x4
    return block_structure([(0.05 * x[0] * x[1], 0.05 * x[2]), (0.05 * x[1], 0.03 * x[3] * x[0])])


@pytest.fixture
def shear(x4):
    x = x4
    return PolynomialMap([x[0], x[1], x[2] + x[0] ** 2 - x[1] ** 2, x[3] + 2 * x[0] * x[1]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sphere_points(rng, count, dim=4):
    p = rng.normal(size=(count, dim))
    return p / np.linalg.norm(p, axis=1)[:, None]
