import numpy as np
import pytest

from bmcd.manifold import ChartManifold


@pytest.fixture(scope="session")
def sphere_chart():
    """Expression-only unit sphere (no oracles), for numeric-path tests."""
    conf = "4/((1+x1^2+x2^2)^2)"
    return ChartManifold(2, [-1, 1, -1, 1],
                         {(1, 1): conf, (2, 1): "0", (2, 2): conf},
                         name="sphere_expr")


@pytest.fixture(scope="session")
def poincare_chart():
    conf = "4/((1-x1^2-x2^2)^2)"
    return ChartManifold(2, [-0.6, 0.6, -0.6, 0.6],
                         {(1, 1): conf, (2, 1): "0", (2, 2): conf},
                         name="poincare_expr")


@pytest.fixture(scope="session")
def halfplane_chart():
    return ChartManifold(2, [-4, 4, 0.05, 6],
                         {(1, 1): "1/(x2^2)", (2, 1): "0", (2, 2): "1/(x2^2)"},
                         name="halfplane_expr")


@pytest.fixture(scope="session")
def flat_chart():
    return ChartManifold(2, [-4, 4, -4, 4],
                         {(1, 1): "1", (2, 1): "0", (2, 2): "1"}, name="flat")


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
