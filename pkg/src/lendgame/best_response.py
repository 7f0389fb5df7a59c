"""Exact single-lender best response.

Fixing the other lenders, a lender's utility is a concave separable
quadratic in its own lending vector, maximised over the budget-capped
orthant {x >= 0, sum x <= c}.  The unconstrained per-borrower optimum is
(d_j - T_j) / 2 where T_j is the supply from the other lenders; when the
budget binds, the optimum is found by exact sort-based water-filling over
the breakpoints at which coordinates hit zero.
"""

from __future__ import annotations

import numpy as np

from .game import LendingGame, utilities


def residual_supply(game: LendingGame, profile: np.ndarray, i: int) -> np.ndarray:
    """Per-borrower supply from everyone except lender i."""
    s = np.asarray(profile, dtype=float)
    return s.sum(axis=0) - s[i]


def _water_fill(demands: np.ndarray, residual: np.ndarray, budget: float) -> np.ndarray:
    """Maximise sum_j x_j (d_j - residual_j - x_j) / d_j over
    {x >= 0, sum x <= budget}; the rate-span factor is a positive constant
    and does not change the argmax.
    """
    free = demands > residual  # coordinates with positive marginal at zero
    x = np.where(free, 0.5 * (demands - residual), 0.0)
    total = x.sum()
    if total <= budget:
        return x

    # Budget binds: find the level lam >= 0 with
    # sum_j max(0, d_j * (b_j - lam)) / 2 = budget, where b_j = 1 - T_j/d_j
    # is the breakpoint at which coordinate j drops out.
    d = demands[free]
    b = 1.0 - residual[free] / d
    order = np.argsort(b)[::-1]
    d, b = d[order], b[order]
    cum_db = np.cumsum(d * b)
    cum_d = np.cumsum(d)
    k_count = d.size
    lam = 0.0
    for k in range(1, k_count + 1):
        lam = (cum_db[k - 1] - 2.0 * budget) / cum_d[k - 1]
        upper = b[k - 1]
        lower = b[k] if k < k_count else 0.0
        if lower <= lam <= upper:
            break
    x_free = np.maximum(0.0, 0.5 * demands[free] * ((1.0 - residual[free] / demands[free]) - lam))
    out = np.zeros_like(x)
    out[free] = x_free
    return out


def best_response(game: LendingGame, profile: np.ndarray, i: int) -> np.ndarray:
    """Unique utility-maximising strategy of lender i against the others."""
    if not 0 <= i < game.m:
        raise IndexError(f"lender index {i} out of range for m={game.m}")
    residual = residual_supply(game, profile, i)
    return _water_fill(game.demands, residual, float(game.budgets[i]))


def best_response_profile(game: LendingGame, profile: np.ndarray) -> np.ndarray:
    """Stacked best responses of all lenders against the frozen profile."""
    return np.stack([best_response(game, profile, i) for i in range(game.m)])


def best_response_gain(game: LendingGame, profile: np.ndarray, i: int) -> float:
    """Utility improvement lender i obtains by switching to its best
    response; non-negative by optimality."""
    s = np.asarray(profile, dtype=float)
    deviated = s.copy()
    deviated[i] = best_response(game, s, i)
    return float(utilities(game, deviated)[i] - utilities(game, s)[i])


def best_response_gains(game: LendingGame, profile: np.ndarray) -> np.ndarray:
    """Best-response gains of every lender (used by the eager scheduler)."""
    return np.array([best_response_gain(game, profile, i) for i in range(game.m)])
