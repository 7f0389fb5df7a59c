"""Closed-form Nash equilibrium of the lending game, with KKT certification.

The unique equilibrium maximises the strictly concave potential over the
product of budget simplices.  After sorting lenders by budget, a threshold
index splits them into an exhausted set (the lowest-budget lenders, who lend
their entire budget, split across borrowers proportionally to demand) and
the rest, who all lend the same demand-proportional amount.  Every borrower
then offers the same market rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import FEAS_TOL, LendingGame, interest_rates, validate_profile


@dataclass(frozen=True)
class EquilibriumResult:
    """Equilibrium profile plus the certificates produced alongside it."""

    profile: np.ndarray                # (m, n) equilibrium lending matrix
    threshold_index: int               # number of budget-exhausted lenders
    exhausted_set: np.ndarray          # original indices of those lenders
    multipliers_budget: np.ndarray     # (m,) budget-constraint multipliers
    multipliers_nonneg: np.ndarray     # (m, n) non-negativity multipliers (all zero)
    market_rate: float


@dataclass(frozen=True)
class KktReport:
    """Residuals of the four KKT condition groups at a candidate point."""

    primal_residual: float
    stationarity_residual: float
    dual_residual: float
    slackness_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(
            self.primal_residual,
            self.stationarity_residual,
            self.dual_residual,
            self.slackness_residual,
        ) <= self.tolerance


def compute_threshold_index(game: LendingGame) -> tuple[int, np.ndarray]:
    """Number of budget-exhausted lenders and the budget-sorted permutation.

    Returns (mbar, perm) where perm sorts budgets non-decreasingly (stable,
    so budget ties keep original order) and mbar is the least k such that the
    (k+1)-th smallest budget strictly exceeds the equal share
    (sum d - sum of the k smallest budgets) / (m - k + 1), with the budget
    beyond the last lender taken as infinite.  Uses the running-value
    recurrence, so the sum is formed once.
    """
    m = game.m
    perm = np.argsort(game.budgets, kind="stable")
    sorted_budgets = game.budgets[perm]
    share = game.total_demand / (m + 1)
    k = 0
    # Strict comparison on purpose: equality keeps the lender in the
    # exhausted set, matching the dual-feasibility argument.
    while k < m and sorted_budgets[k] <= share:
        share = (share * (m - k + 1) - sorted_budgets[k]) / (m - k)
        k += 1
    return k, perm


def market_rate(game: LendingGame) -> float:
    """Common equilibrium interest rate offered by every borrower."""
    mbar, perm = compute_threshold_index(game)
    m = game.m
    exhausted_budget_frac = game.budgets[perm[:mbar]].sum() / game.total_demand
    return float(
        game.rate_min / (m - mbar + 1) * (m - mbar + exhausted_budget_frac)
        + game.rate_max / (m - mbar + 1) * (1.0 - exhausted_budget_frac)
    )


def solve_equilibrium(game: LendingGame) -> EquilibriumResult:
    """Unique pure Nash equilibrium in O(mn + m log m).

    Exhausted lenders lend c_i * d_j / sum(d); the rest lend the common
    amount (1 - sum_exhausted(c) / sum(d)) / (m - mbar + 1) * d_j.  Budget
    multipliers are nonzero only on the exhausted set.
    """
    mbar, perm = compute_threshold_index(game)
    m, n = game.m, game.n
    total_d = game.total_demand
    exhausted = perm[:mbar]
    unexhausted = perm[mbar:]
    exhausted_frac = game.budgets[exhausted].sum() / total_d
    common_frac = (1.0 - exhausted_frac) / (m - mbar + 1)

    profile = np.empty((m, n))
    profile[exhausted] = np.outer(game.budgets[exhausted] / total_d, game.demands)
    profile[unexhausted] = common_frac * game.demands

    mu_budget = np.zeros(m)
    mu_budget[exhausted] = (game.rate_min - game.rate_max) * (
        game.budgets[exhausted] / total_d - common_frac
    )

    rate = float(
        game.rate_min / (m - mbar + 1) * (m - mbar + exhausted_frac)
        + game.rate_max / (m - mbar + 1) * (1.0 - exhausted_frac)
    )
    return EquilibriumResult(
        profile=profile,
        threshold_index=mbar,
        exhausted_set=np.sort(exhausted),
        multipliers_budget=mu_budget,
        multipliers_nonneg=np.zeros((m, n)),
        market_rate=rate,
    )


def kkt_check(
    game: LendingGame,
    profile: np.ndarray,
    multipliers_budget: np.ndarray,
    multipliers_nonneg: np.ndarray,
    tolerance: float = 1e-8,
) -> KktReport:
    """Residuals of the KKT system of the potential-maximisation problem.

    Stationarity residual is the max absolute value of
    (rate_min - rate_max) * ((s_ij + sum_k s_kj) / d_j - 1) - mu_i + mu_ij.
    """
    s = np.asarray(profile, dtype=float)
    mu_b = np.asarray(multipliers_budget, dtype=float)
    mu_n = np.asarray(multipliers_nonneg, dtype=float)
    if s.shape != (game.m, game.n) or mu_b.shape != (game.m,) or mu_n.shape != s.shape:
        raise ValueError("shape mismatch between game, profile and multipliers")

    row_sums = s.sum(axis=1)
    primal = max(
        float(np.maximum(row_sums - game.budgets, 0.0).max()),
        float(np.maximum(-s, 0.0).max()),
    )

    col = s.sum(axis=0)
    grad = (game.rate_min - game.rate_max) * ((s + col) / game.demands - 1.0)
    stationarity = float(np.abs(grad - mu_b[:, None] + mu_n).max())

    dual = max(
        float(np.maximum(-mu_b, 0.0).max()),
        float(np.maximum(-mu_n, 0.0).max()),
    )

    slackness = max(
        float(np.abs(mu_b * (game.budgets - row_sums)).max()),
        float(np.abs(mu_n * s).max()),
    )

    return KktReport(
        primal_residual=primal,
        stationarity_residual=stationarity,
        dual_residual=dual,
        slackness_residual=slackness,
        tolerance=tolerance,
    )


def certify(game: LendingGame, result: EquilibriumResult, tolerance: float = 1e-8) -> KktReport:
    """KKT report for a solved equilibrium (convenience wrapper)."""
    validate_profile(game, result.profile, FEAS_TOL)
    return kkt_check(
        game,
        result.profile,
        result.multipliers_budget,
        result.multipliers_nonneg,
        tolerance,
    )


def rate_spread(game: LendingGame, profile: np.ndarray) -> float:
    """Max minus min borrower rate; zero (to rounding) at equilibrium."""
    rates = interest_rates(game, profile)
    return float(rates.max() - rates.min())
