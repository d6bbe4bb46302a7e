import numpy as np
import pytest

from moranswitch.games import PayoffMatrix


@pytest.fixture
def case11() -> PayoffMatrix:
    return PayoffMatrix(4, 1, 3, 2)


@pytest.fixture
def case2() -> PayoffMatrix:
    return PayoffMatrix(4, 2, 1, 4)


@pytest.fixture
def case13() -> PayoffMatrix:
    return PayoffMatrix(2, 1, 1, 2)


def random_positive_matrices(count: int, seed: int = 1234) -> list[PayoffMatrix]:
    """Random matrices with positive entries (any regime)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b, c, d = rng.uniform(0.5, 5.0, size=4)
        out.append(PayoffMatrix(a, b, c, d))
    return out


def random_case1_matrices(count: int, seed: int = 99) -> list[PayoffMatrix]:
    """Random balanced matrices (c = a + b - d) with positive entries."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        a, b, d = rng.uniform(0.5, 5.0, size=3)
        c = a + b - d
        if c > 0.05:
            out.append(PayoffMatrix(a, b, c, d))
    return out


def finite_difference(fun, x: float, h: float = 1e-5) -> float:
    return (fun(x + h) - fun(x - h)) / (2.0 * h)
