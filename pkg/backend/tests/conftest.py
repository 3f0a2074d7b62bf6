"""
Shared fixtures for the gpcmc test suite.
"""
import numpy as np
import pytest

from gpcmc.models.kernel import Dataset


def random_spd(n: int, gen: np.random.Generator, cond: float = 10.0) -> np.ndarray:
    """Random symmetric positive definite matrix with condition number `cond`."""
    q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    eig = np.logspace(0.0, np.log10(cond), n) if n > 1 else np.ones(1)
    gen.shuffle(eig)
    m = (q * eig) @ q.T
    return 0.5 * (m + m.T)


@pytest.fixture
def spd_factory():
    return random_spd


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny_1d() -> Dataset:
    """Ten single-feature patterns, five per class."""
    x = np.array([-0.3, 0.1, -0.05, 0.2, -0.1, 0.9, 1.2, 0.7, 1.1, 0.95])
    y = np.array([1, 1, 1, 1, 1, -1, -1, -1, -1, -1])
    return Dataset(x, y)


@pytest.fixture
def tiny_2d() -> Dataset:
    g = np.random.default_rng(7)
    x = np.vstack((g.normal(0.0, 1.0, (6, 2)), g.normal(2.0, 1.0, (6, 2))))
    y = np.array([1] * 6 + [-1] * 6)
    return Dataset(x, y)
