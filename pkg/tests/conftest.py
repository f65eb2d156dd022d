import numpy as np
import pytest

from vintagecap.model import canonical_instance


@pytest.fixture(scope="session")
def lq1():
    return canonical_instance("lq-1")


@pytest.fixture(scope="session")
def box1():
    return canonical_instance("box-1")


@pytest.fixture(scope="session")
def null1():
    return canonical_instance("null-1")


@pytest.fixture(scope="session")
def sat1():
    return canonical_instance("sat-1")


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
