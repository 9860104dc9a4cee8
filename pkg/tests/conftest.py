import warnings

import numpy as np
import pytest

from gaugewigner.grid import make_grid


@pytest.fixture
def grid1():
    return make_grid(1, 64, 64, 8.0, 8.0)


@pytest.fixture
def grid2():
    return make_grid(2, 32, 32, 6.0, 8.0)


@pytest.fixture
def small2():
    return make_grid(2, 16, 16, 6.0, 8.0)


@pytest.fixture(autouse=True)
def _quiet_numpy():
    with np.errstate(all="raise", under="ignore"):
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            yield


def rel_sup(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


def rel_l2(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))
