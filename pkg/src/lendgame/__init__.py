"""Interbank lending game: equilibrium solver, KKT certification and
convergent best-response dynamics."""

from .game import (
    FEAS_TOL,
    NUM_TOL,
    LendingGame,
    interest_rate,
    interest_rates,
    potential,
    potential_gradient,
    potential_telescoped,
    prefix_interest_rate,
    utilities,
    utility,
    validate_profile,
)
from .equilibrium import (
    EquilibriumResult,
    KktReport,
    certify,
    compute_threshold_index,
    kkt_check,
    market_rate,
    rate_spread,
    solve_equilibrium,
)
from .best_response import (
    best_response,
    best_response_gain,
    best_response_gains,
    best_response_profile,
    residual_supply,
)
from .dynamics import (
    VARIANTS,
    DynamicsConfig,
    Trajectory,
    integrate_continuous,
    pg_step_bound,
    project_capped_simplex,
    run,
    step_eager,
    step_pseudo_gradient,
    step_randomised,
)
from .oracle import (
    OracleSolution,
    concavity_gap,
    finite_difference_gradient,
    grid_best_response,
    hessian_quadratic_form,
    jacobian_quadratic_form,
    projected_gradient_solve,
    random_game,
    random_profile,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
