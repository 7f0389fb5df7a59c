import numpy as np
import pytest

from lendgame import (
    DynamicsConfig,
    LendingGame,
    integrate_continuous,
    pg_step_bound,
    potential,
    project_capped_simplex,
    run,
    solve_equilibrium,
    step_eager,
    step_pseudo_gradient,
    step_randomised,
    validate_profile,
)
from lendgame.oracle import random_game, random_profile

from conftest import seeded_rng


def random_square_game(seed, m, n):
    r = np.random.default_rng(seed)
    return LendingGame(r.uniform(0.5, 100.0, m), r.uniform(0.5, 100.0, n), 0.02, 0.08)


def test_projection_examples():
    assert np.allclose(project_capped_simplex(np.array([-1.0, 2.0]), 1.0), [0.0, 1.0])
    assert np.allclose(project_capped_simplex(np.array([0.2, 0.3]), 1.0), [0.2, 0.3])
    assert np.allclose(project_capped_simplex(np.array([1.0, 1.0]), 1.0), [0.5, 0.5])


def test_projection_against_grid():
    # Euclidean projection minimises the distance over the feasible grid.
    rng = seeded_rng(30)
    for _ in range(50):
        v = rng.uniform(-2.0, 2.0, 2)
        cap = float(rng.uniform(0.5, 2.0))
        p = project_capped_simplex(v, cap)
        xs = np.linspace(0.0, cap, 201)
        grid = np.array([(a, b) for a in xs for b in xs if a + b <= cap + 1e-12])
        dists = np.linalg.norm(grid - v, axis=1)
        assert np.linalg.norm(p - v) <= dists.min() + 1e-6


def test_eager_fixed_point(two_lender_game):
    star = solve_equilibrium(two_lender_game).profile
    new, _, gain = step_eager(two_lender_game, star, 0.7)
    assert np.abs(new - star).max() <= 1e-12
    assert abs(gain) <= 1e-12


def test_eager_zero_start_picks_largest_gain(two_lender_game):
    new, lender, gain = step_eager(two_lender_game, np.zeros((2, 1)), 1.0)
    assert lender == 1
    assert gain == pytest.approx(0.09, abs=1e-12)
    assert new[1, 0] == pytest.approx(3.0, abs=1e-12)
    assert new[0, 0] == 0.0


def test_eager_single_lender_one_step(monopoly_game):
    star = solve_equilibrium(monopoly_game).profile
    new, _, _ = step_eager(monopoly_game, np.zeros((1, 1)), 1.0)
    assert np.abs(new - star).max() <= 1e-12


def test_randomised_fixed_point(two_lender_game):
    star = solve_equilibrium(two_lender_game).profile
    rng = seeded_rng(0)
    new, _ = step_randomised(two_lender_game, star, 1.0, np.array([0.5, 0.5]), rng)
    assert np.abs(new - star).max() <= 1e-12


def test_randomised_point_mass_equals_deterministic(two_lender_game):
    rng = seeded_rng(1)
    s = np.zeros((2, 1))
    new, lender = step_randomised(two_lender_game, s, 0.5, np.array([1.0 - 1e-12, 1e-12]), rng)
    assert lender == 0
    assert new[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_randomised_reproducible():
    g = random_square_game(5, 4, 3)
    cfg = DynamicsConfig(variant="randomised", alpha=0.8, max_iters=200, stop_gap=1e-15, seed=42)
    t1 = run(g, g.zero_profile(), cfg)
    t2 = run(g, g.zero_profile(), cfg)
    assert np.array_equal(t1.lenders, t2.lenders)
    assert np.array_equal(t1.potentials, t2.potentials)


def test_pseudo_gradient_fixed_point(two_lender_game):
    star = solve_equilibrium(two_lender_game).profile
    step = 0.5 * pg_step_bound(two_lender_game)
    new = step_pseudo_gradient(two_lender_game, star, np.ones(2), step)
    assert np.abs(new - star).max() <= 1e-10


def test_pseudo_gradient_unprojected_step_at_zero():
    g = LendingGame([100.0, 100.0], [10.0], 0.02, 0.08)
    step = 0.5 * pg_step_bound(g)
    new = step_pseudo_gradient(g, g.zero_profile(), np.ones(2), step)
    assert np.allclose(new, step * g.rate_span)


def test_pseudo_gradient_step_bound_enforced(two_lender_game):
    bound = pg_step_bound(two_lender_game)
    with pytest.raises(ValueError, match="stability bound"):
        step_pseudo_gradient(two_lender_game, np.zeros((2, 1)), np.ones(2), 2.0 * bound)
    cfg = DynamicsConfig(variant="pseudo_gradient", pg_step=2.0 * bound)
    with pytest.raises(ValueError, match="stability bound"):
        cfg.resolved(two_lender_game)


def test_config_validation(two_lender_game):
    with pytest.raises(ValueError, match="alpha"):
        DynamicsConfig(alpha=0.0).resolved(two_lender_game)
    with pytest.raises(ValueError, match="variant"):
        DynamicsConfig(variant="fictitious_play").resolved(two_lender_game)
    with pytest.raises(ValueError, match="lender_weights"):
        DynamicsConfig(lender_weights=np.array([1.0, 0.0])).resolved(two_lender_game)


def test_continuous_exponential_solution(monopoly_game):
    traj = integrate_continuous(monopoly_game, np.zeros((1, 1)), 0.01, 2.0)
    snapshots = dict(traj.snapshots)
    for t in (0.5, 1.0, 2.0):
        value = snapshots[int(round(t / 0.01))][0, 0]
        assert value == pytest.approx(5.0 * (1.0 - np.exp(-t)), abs=1e-5)


def test_continuous_fixed_point(two_lender_game):
    star = solve_equilibrium(two_lender_game).profile
    traj = integrate_continuous(two_lender_game, star, 0.01, 1.0)
    assert np.abs(traj.final_profile - star).max() <= 1e-10
    assert np.abs(traj.lyapunov_gaps).max() <= 1e-12


def test_continuous_lyapunov_monotone_random_games():
    for seed in range(10):
        g = random_square_game(600 + seed, 3, 3)
        traj = integrate_continuous(g, g.zero_profile(), 0.01, 50.0)
        gaps = traj.lyapunov_gaps
        assert np.all(np.diff(gaps) <= 1e-8 * 0.01)
        assert gaps[-1] <= 1e-6
        assert gaps.min() >= -1e-10


def test_monotone_potential_asynchronous():
    rng = seeded_rng(31)
    for variant in ("eager", "randomised"):
        for _ in range(5):
            g = random_game(rng, 5, 5)
            alpha = float(rng.uniform(0.1, 1.0))
            cfg = DynamicsConfig(variant=variant, alpha=alpha, max_iters=300,
                                 stop_gap=1e-12, seed=int(rng.integers(1 << 31)))
            traj = run(g, random_profile(rng, g), cfg)
            assert np.all(np.diff(traj.potentials) >= -1e-10)
            assert np.all(traj.lyapunov_gaps >= -1e-10)


def test_feasibility_preserved_all_variants():
    rng = seeded_rng(32)
    g = random_game(rng, 4, 4)
    start = random_profile(rng, g)
    for variant in ("eager", "randomised", "pseudo_gradient"):
        cfg = DynamicsConfig(variant=variant, max_iters=100, stop_gap=1e-13,
                             snapshot_every=1, seed=9)
        traj = run(g, start, cfg)
        for _, snap in traj.snapshots:
            validate_profile(g, snap)
    traj = integrate_continuous(g, start, 0.02, 5.0, snapshot_every=1)
    for _, snap in traj.snapshots:
        validate_profile(g, snap)


def test_run_iteration_cap_status(two_lender_game):
    cfg = DynamicsConfig(variant="eager", alpha=0.01, max_iters=3, stop_gap=1e-12)
    traj = run(two_lender_game, np.zeros((2, 1)), cfg)
    assert traj.status == "iteration_cap"
    assert traj.iterations == 3


def test_run_converges_eager():
    g = random_square_game(7, 5, 4)
    cfg = DynamicsConfig(variant="eager", alpha=1.0, stop_gap=1e-8, max_iters=10_000)
    traj = run(g, g.zero_profile(), cfg)
    assert traj.status == "converged"
    assert traj.final_gap <= 1e-8


def test_gradient_ball_bound():
    # Directional derivative persists at half its value within the stated
    # l1-ball radius.
    rng = seeded_rng(33)
    checked = 0
    while checked < 50:
        g = random_game(rng, 6, 6)
        s = random_profile(rng, g)
        v = rng.standard_normal((g.m, g.n))
        from lendgame import potential_gradient
        vdot = float((v * potential_gradient(g, s)).sum())
        if vdot <= 0:
            continue
        a = g.gradient_variation_bound()
        radius = vdot / (2.0 * a * float(np.abs(v).max()))
        direction = rng.standard_normal((g.m, g.n))
        direction /= np.abs(direction).sum()
        s_near = s + float(rng.uniform(0.0, radius)) * direction
        vdot_near = float((v * potential_gradient(g, s_near)).sum())
        assert vdot_near >= 0.5 * vdot - 1e-12
        checked += 1
