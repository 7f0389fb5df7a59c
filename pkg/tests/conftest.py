import numpy as np
import pytest

from lendgame import LendingGame


@pytest.fixture
def two_lender_game():
    """The worked 2x1 instance: equilibrium (1, 2.5), market rate 0.045."""
    return LendingGame([1.0, 10.0], [6.0], 0.02, 0.08)


@pytest.fixture
def monopoly_game():
    return LendingGame([100.0], [10.0], 0.02, 0.08)


def seeded_rng(seed):
    return np.random.Generator(np.random.Philox(seed))
