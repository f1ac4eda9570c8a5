import numpy as np
import pytest

from polldiff.model import (PAPER_2015, PAPER_P0, Bounded, CenteredBump,
                            Constant, Unbounded, make_grid)


@pytest.fixture(scope="session")
def params():
    return PAPER_2015


@pytest.fixture(scope="session")
def bounded():
    return Bounded(-1.0, 1.0)


@pytest.fixture(scope="session")
def window():
    return Unbounded(1.0)


@pytest.fixture(scope="session")
def bump():
    return CenteredBump(PAPER_P0)


@pytest.fixture(scope="session")
def flat():
    return Constant(PAPER_P0)


@pytest.fixture(scope="session")
def grid201(params, bounded):
    return make_grid(bounded, params, 201, 201)


@pytest.fixture(scope="session")
def grid101(params, bounded):
    return make_grid(bounded, params, 101, 101)


def rel_sup(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)
