import pytest

from quatmhd.grid import build_domain
from quatmhd.operators import operator_set


@pytest.fixture(scope="session")
def dom8():
    return build_domain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 8)


@pytest.fixture(scope="session")
def dom12():
    return build_domain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 12)


@pytest.fixture(scope="session")
def dom16():
    return build_domain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 16)


@pytest.fixture(scope="session")
def ops8(dom8):
    return operator_set(dom8)


@pytest.fixture(scope="session")
def ops12(dom12):
    return operator_set(dom12)


@pytest.fixture(scope="session")
def ops16(dom16):
    return operator_set(dom16)
