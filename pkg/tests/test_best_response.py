import numpy as np
import pytest

from lendgame import (
    LendingGame,
    best_response,
    best_response_gain,
    residual_supply,
    solve_equilibrium,
    utility,
)
from lendgame.oracle import grid_best_response, random_game, random_profile

from conftest import seeded_rng


def test_residual_supply():
    g = LendingGame([5.0, 5.0], [4.0, 4.0], 0.02, 0.08)
    s = np.array([[1.0, 2.0], [3.0, 0.5]])
    assert np.allclose(residual_supply(g, s, 0), [3.0, 0.5])
    assert np.allclose(residual_supply(g, s, 1), [1.0, 2.0])


def test_interior_optimum():
    g = LendingGame([5.0, 100.0], [10.0], 0.02, 0.08)
    s = np.array([[0.0], [4.0]])  # residual supply for lender 0 is 4
    assert best_response(g, s, 0) == pytest.approx([3.0], abs=1e-12)


def test_saturated_market_lends_nothing():
    g = LendingGame([5.0, 100.0], [10.0, 8.0], 0.02, 0.08)
    s = np.array([[0.0, 0.0], [10.0, 9.0]])
    assert np.allclose(best_response(g, s, 0), 0.0)


def test_symmetric_water_fill():
    g = LendingGame([6.0], [10.0, 10.0], 0.02, 0.08)
    x = best_response(g, np.zeros((1, 2)), 0)
    assert x == pytest.approx([3.0, 3.0], abs=1e-12)


def test_budget_clipped_single_borrower(two_lender_game):
    zero = np.zeros((2, 1))
    assert best_response(two_lender_game, zero, 0) == pytest.approx([1.0], abs=1e-12)
    assert best_response(two_lender_game, zero, 1) == pytest.approx([3.0], abs=1e-12)


def test_gain_hand_values(two_lender_game):
    zero = np.zeros((2, 1))
    assert best_response_gain(two_lender_game, zero, 0) == pytest.approx(0.05, abs=1e-12)
    assert best_response_gain(two_lender_game, zero, 1) == pytest.approx(0.09, abs=1e-12)


def test_gain_zero_at_equilibrium():
    rng = seeded_rng(20)
    for _ in range(30):
        g = random_game(rng, 6, 6)
        star = solve_equilibrium(g).profile
        for i in range(g.m):
            assert abs(best_response_gain(g, star, i)) <= 1e-10


def test_fixed_point_at_equilibrium():
    rng = seeded_rng(21)
    for _ in range(30):
        g = random_game(rng, 6, 6)
        star = solve_equilibrium(g).profile
        for i in range(g.m):
            assert np.abs(best_response(g, star, i) - star[i]).max() <= 1e-9


def test_optimality_certificate():
    # Active coordinates share a common marginal, inactive ones fall below
    # it, and the common marginal is zero when the budget is slack.
    rng = seeded_rng(22)
    for _ in range(100):
        g = random_game(rng, 6, 6)
        s = random_profile(rng, g)
        i = int(rng.integers(g.m))
        x = best_response(g, s, i)
        t = residual_supply(g, s, i)
        marginals = g.rate_span * (1.0 - (2.0 * x + t) / g.demands)
        active = x > 1e-12
        slack = x.sum() < g.budgets[i] - 1e-9
        if active.any():
            lam = marginals[active].mean()
            assert np.abs(marginals[active] - lam).max() <= 1e-9
            if slack:
                assert abs(lam) <= 1e-9
            else:
                assert lam >= -1e-9
            assert np.all(marginals[~active] <= lam + 1e-9)


def test_monotone_in_residual_supply():
    rng = seeded_rng(23)
    for _ in range(50):
        g = random_game(rng, 4, 5)
        s = random_profile(rng, g)
        i = int(rng.integers(g.m))
        x = best_response(g, s, i)
        j = int(rng.integers(g.n))
        k = int(rng.integers(g.m))
        if k == i:
            continue
        bumped = s.copy()
        bumped[k, j] += 0.5 * float(g.demands[j])
        x2 = best_response(g, bumped, i)
        assert x2[j] <= x[j] + 1e-10
        others = np.arange(g.n) != j
        if x.sum() >= g.budgets[i] - 1e-9:
            assert np.all(x2[others] >= x[others] - 1e-10)


def test_grid_oracle_one_dim():
    g = LendingGame([5.0, 100.0], [10.0], 0.02, 0.08)
    s = np.array([[0.0], [4.0]])
    grid = grid_best_response(g, s, 0, grid_step=1e-4)
    assert grid == pytest.approx([3.0], abs=2e-4)


def test_grid_oracle_matches_water_fill():
    rng = seeded_rng(24)
    for _ in range(6):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        g = LendingGame(rng.uniform(0.5, 4.0, m), rng.uniform(1.0, 6.0, n), 0.02, 0.08)
        s = random_profile(rng, g)
        i = int(rng.integers(m))
        exact = best_response(g, s, i)
        grid = grid_best_response(g, s, i, grid_step=1e-3)
        assert np.abs(exact - grid).max() <= 2e-3
        dev_exact, dev_grid = s.copy(), s.copy()
        dev_exact[i] = exact
        dev_grid[i] = grid
        assert utility(g, dev_exact, i) >= utility(g, dev_grid, i) - 1e-5


def test_bad_index(two_lender_game):
    with pytest.raises(IndexError):
        best_response(two_lender_game, np.zeros((2, 1)), 2)
