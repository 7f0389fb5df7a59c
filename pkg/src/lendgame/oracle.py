"""Independent verification machinery.

Nothing here reuses the closed-form equilibrium: the projected-gradient
maximiser, the finite-difference gradient, the exhaustive grid best
response and the closed-form concavity/Jacobian identities each provide a
second route to a quantity the production code computes directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import pg_step_bound, project_capped_simplex
from .game import LendingGame, potential, potential_gradient, validate_profile


@dataclass(frozen=True)
class OracleSolution:
    profile: np.ndarray
    achieved_potential: float
    iterations: int
    final_projected_gradient_norm: float
    converged: bool


def gradient_tol_for_profile_tol(game: LendingGame, profile_tol: float) -> float:
    """Stopping tolerance on the projected-gradient map that guarantees the
    returned profile is within roughly profile_tol of the maximiser.

    The potential is strongly concave with modulus span / max_j d_j, so the
    distance to the optimum is at most about the gradient-map norm divided
    by that modulus; a safety factor of 10 absorbs the constants.
    """
    modulus = game.rate_span / float(game.demands.max())
    return 0.1 * profile_tol * modulus


def projected_gradient_solve(
    game: LendingGame,
    tol: float = 1e-9,
    max_iters: int = 500_000,
    step: float | None = None,
    start: np.ndarray | None = None,
) -> OracleSolution:
    """Maximise the potential by projected gradient ascent.

    Uses the pseudo-gradient stability bound as the step size and stops when
    the sup-norm of the projected-gradient map drops to tol.  The potential
    is strictly concave, so the limit is the unique maximiser.  On
    exhausting max_iters the partial solution is returned with
    converged=False.
    """
    if step is None:
        step = pg_step_bound(game)
    s = game.zero_profile() if start is None else validate_profile(game, start).copy()
    norm = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        grad = potential_gradient(game, s)
        moved = s + step * grad
        nxt = np.empty_like(s)
        for i in range(game.m):
            nxt[i] = project_capped_simplex(moved[i], float(game.budgets[i]))
        norm = float(np.abs(nxt - s).max() / step)
        s = nxt
        if norm <= tol:
            break
    return OracleSolution(
        profile=s,
        achieved_potential=potential(game, s),
        iterations=it,
        final_projected_gradient_norm=norm,
        converged=norm <= tol,
    )


def finite_difference_gradient(game: LendingGame, profile: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the potential, entry by entry."""
    if h <= 0:
        raise ValueError("h must be positive")
    s = np.asarray(profile, dtype=float)
    out = np.empty_like(s)
    for i in range(game.m):
        for j in range(game.n):
            plus = s.copy()
            minus = s.copy()
            plus[i, j] += h
            minus[i, j] -= h
            out[i, j] = (potential(game, plus) - potential(game, minus)) / (2.0 * h)
    return out


def concavity_gap(game: LendingGame, s, s_prime, lam: float) -> tuple[float, float]:
    """Measured and closed-form concavity gap of the potential.

    measured  = Phi(lam*s + (1-lam)*s') - lam*Phi(s) - (1-lam)*Phi(s')
    closed    = lam*(1-lam) * sum_j span/(2 d_j) * (sum_i D_ij^2 + (sum_i D_ij)^2)

    with D = s - s'.  Both are strictly positive whenever s != s'.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    s = np.asarray(s, dtype=float)
    s_prime = np.asarray(s_prime, dtype=float)
    blend = lam * s + (1.0 - lam) * s_prime
    measured = potential(game, blend) - lam * potential(game, s) - (1.0 - lam) * potential(game, s_prime)
    delta = s - s_prime
    closed = lam * (1.0 - lam) * float(
        np.sum(
            game.rate_span / (2.0 * game.demands)
            * ((delta * delta).sum(axis=0) + delta.sum(axis=0) ** 2)
        )
    )
    return float(measured), closed


def jacobian_quadratic_form(game: LendingGame, v: np.ndarray) -> float:
    """Quadratic form of the (constant) pseudo-gradient Jacobian:
    sum_j (rate_min - rate_max)/d_j * (sum_i v_ij^2 + (sum_i v_ij)^2).
    Strictly negative for nonzero v."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != game.m * game.n:
        raise ValueError(f"expected a vector of length {game.m * game.n}, got {v.size}")
    vm = v.reshape(game.m, game.n)
    return float(
        np.sum(
            (game.rate_min - game.rate_max) / game.demands
            * ((vm * vm).sum(axis=0) + vm.sum(axis=0) ** 2)
        )
    )


def hessian_quadratic_form(game: LendingGame, v: np.ndarray) -> float:
    """Same quadratic form contracted entrywise against the explicit Hessian
    (diagonal 2*(rate_min-rate_max)/d_j, same-borrower off-diagonal
    (rate_min-rate_max)/d_j); cross-validates jacobian_quadratic_form."""
    v = np.asarray(v, dtype=float).reshape(game.m, game.n)
    total = 0.0
    for j in range(game.n):
        coeff = (game.rate_min - game.rate_max) / game.demands[j]
        block = np.full((game.m, game.m), coeff)
        block[np.diag_indices(game.m)] = 2.0 * coeff
        total += float(v[:, j] @ block @ v[:, j])
    return total


def random_game(
    rng: np.random.Generator,
    max_m: int = 12,
    max_n: int = 12,
    budget_range: tuple[float, float] = (0.5, 100.0),
    demand_range: tuple[float, float] = (0.5, 100.0),
) -> LendingGame:
    """Random instance for property runs: sizes up to (max_m, max_n),
    budgets/demands in the given ranges, corridor inside (0, 0.2)."""
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    rate_min = float(rng.uniform(0.005, 0.1))
    rate_max = float(rng.uniform(rate_min + 0.01, 0.2))
    return LendingGame(
        budgets=rng.uniform(*budget_range, size=m),
        demands=rng.uniform(*demand_range, size=n),
        rate_min=rate_min,
        rate_max=rate_max,
    )


def random_profile(rng: np.random.Generator, game: LendingGame) -> np.ndarray:
    """Random feasible profile: uniform rows scaled into the budget set."""
    s = rng.uniform(0.0, 1.0, size=(game.m, game.n))
    scale = rng.uniform(0.0, 1.0, size=game.m) * game.budgets / s.sum(axis=1)
    return s * scale[:, None]


def grid_best_response(
    game: LendingGame,
    profile: np.ndarray,
    i: int,
    grid_step: float = 1e-3,
) -> np.ndarray:
    """Exhaustive grid-search best response for lender i (n <= 3 only).

    Every coordinate and the budget are restricted to multiples of
    grid_step; the grid optimum is found by exact dynamic programming over
    the discrete allocations, which enumerates the same set of candidates as
    brute force.
    """
    if game.n > 3:
        raise ValueError("grid oracle is limited to n <= 3")
    s = np.asarray(profile, dtype=float)
    residual = s.sum(axis=0) - s[i]
    budget = float(game.budgets[i])
    k_max = int(np.floor(budget / grid_step + 1e-12))
    amounts = np.arange(k_max + 1) * grid_step
    # Per-borrower payoff on the grid (rate-span factor dropped: positive).
    payoff = [amounts * (game.demands[j] - residual[j] - amounts) / game.demands[j] for j in range(game.n)]

    best = payoff[0].copy()          # best value using exactly k units so far
    choices = [np.arange(k_max + 1)]
    for j in range(1, game.n):
        new_best = np.full(k_max + 1, -np.inf)
        choice = np.zeros(k_max + 1, dtype=int)
        for k in range(k_max + 1):   # units given to borrower j
            cand = np.full(k_max + 1, -np.inf)
            cand[k:] = best[: k_max + 1 - k] + payoff[j][k]
            better = cand > new_best
            new_best[better] = cand[better]
            choice[better] = k
        best = new_best
        choices.append(choice)

    total = int(np.argmax(best))
    x = np.zeros(game.n)
    for j in range(game.n - 1, 0, -1):
        k = int(choices[j][total])
        x[j] = k * grid_step
        total -= k
    x[0] = total * grid_step
    return x
