import numpy as np
import pytest

from rootedtrees import TreeShape, enumerate_subtrees


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture(scope="session")
def trees_2_2():
    return list(enumerate_subtrees(TreeShape(2, 2)))


@pytest.fixture(scope="session")
def trees_3_2():
    return list(enumerate_subtrees(TreeShape(3, 2)))
