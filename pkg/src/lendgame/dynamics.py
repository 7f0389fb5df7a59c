"""Best-response-style dynamics of the lending game.

Four variants, all provably convergent to the unique equilibrium:

* eager: at each step the lender with the largest best-response gain blends
  a fraction alpha toward its best response (asynchronous);
* randomised: the updating lender is drawn from a fixed positive
  distribution using a seeded counter-based generator (Philox);
* pseudo_gradient: all lenders simultaneously take a small step along their
  (weighted) utility gradients, followed by per-lender Euclidean projection
  back onto the budget-capped orthant (synchronous);
* continuous: the ODE ds_i/dt = BR_i(s) - s_i, integrated with classical
  fixed-step RK4.

Trajectories record the potential and the Lyapunov gap (potential at
equilibrium minus current potential) at every step, with thinned profile
snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .best_response import best_response, best_response_gains, best_response_profile
from .equilibrium import solve_equilibrium
from .game import LendingGame, potential, validate_profile

VARIANTS = ("eager", "randomised", "pseudo_gradient", "continuous")

STATUS_CONVERGED = "converged"
STATUS_ITERATION_CAP = "iteration_cap"
STATUS_STEP_ERROR = "step_error"


def pg_step_bound(game: LendingGame, pg_weights: np.ndarray | None = None) -> float:
    """Largest stable step for the discretised pseudo-gradient dynamics.

    The pseudo-gradient Jacobian is constant with spectral radius at most
    2 * (rate_max - rate_min) * (m + 1) / min_j d_j (times the largest
    weight); the bound is its reciprocal.
    """
    wmax = 1.0 if pg_weights is None else float(np.asarray(pg_weights, dtype=float).max())
    return float(game.demands.min() / (2.0 * game.rate_span * (game.m + 1) * wmax))


def project_capped_simplex(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x <= cap}.

    Clip at zero; if the positive part fits under the cap it is the
    projection, otherwise project onto the simplex {x >= 0, sum x = cap}
    with the standard sort-based rule.
    """
    v = np.asarray(v, dtype=float)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= cap:
        return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - cap
    ks = np.arange(1, v.size + 1)
    cond = u - css / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


@dataclass
class DynamicsConfig:
    """Parameters of a dynamics run.  Fields left as None get defaults
    derived from the game when the run starts."""

    variant: str = "eager"
    alpha: float = 1.0
    lender_weights: np.ndarray | None = None   # randomised variant; default uniform
    pg_weights: np.ndarray | None = None       # pseudo-gradient weights; default ones
    pg_step: float | None = None               # default: half the stability bound
    ode_step: float = 0.01
    horizon: float = 50.0
    max_iters: int = 100_000
    stop_gap: float = 1e-8
    snapshot_every: int = 10
    seed: int = 0

    def resolved(self, game: LendingGame) -> "DynamicsConfig":
        """Validated copy with game-dependent defaults filled in."""
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.stop_gap <= 0:
            raise ValueError("stop_gap must be positive")
        if self.ode_step <= 0:
            raise ValueError("ode_step must be positive")

        weights = self.lender_weights
        if weights is None:
            weights = np.full(game.m, 1.0 / game.m)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (game.m,) or weights.min() <= 0 or not np.isclose(weights.sum(), 1.0):
                raise ValueError("lender_weights must be a positive distribution over the m lenders")

        pg_weights = self.pg_weights
        if pg_weights is None:
            pg_weights = np.ones(game.m)
        else:
            pg_weights = np.asarray(pg_weights, dtype=float)
            if pg_weights.shape != (game.m,) or pg_weights.min() <= 0:
                raise ValueError("pg_weights must be m positive reals")

        bound = pg_step_bound(game, pg_weights)
        pg_step = self.pg_step if self.pg_step is not None else 0.5 * bound
        if not 0 < pg_step <= bound:
            raise ValueError(
                f"pg_step {pg_step:.6g} outside the stability bound (0, {bound:.6g}]"
            )
        return DynamicsConfig(
            variant=self.variant,
            alpha=self.alpha,
            lender_weights=weights,
            pg_weights=pg_weights,
            pg_step=pg_step,
            ode_step=self.ode_step,
            horizon=self.horizon,
            max_iters=self.max_iters,
            stop_gap=self.stop_gap,
            snapshot_every=self.snapshot_every,
            seed=self.seed,
        )


@dataclass
class Trajectory:
    """Recorded run: one scalar record per step, thinned profile snapshots."""

    steps: np.ndarray
    times: np.ndarray
    lenders: np.ndarray            # updating lender per step, -1 for synchronous
    potentials: np.ndarray
    lyapunov_gaps: np.ndarray
    snapshots: list[tuple[int, np.ndarray]]
    final_profile: np.ndarray
    status: str

    @property
    def iterations(self) -> int:
        return int(self.steps[-1]) if self.steps.size else 0

    @property
    def final_gap(self) -> float:
        return float(self.lyapunov_gaps[-1]) if self.lyapunov_gaps.size else float("nan")


class _Recorder:
    def __init__(self, snapshot_every: int):
        self.snapshot_every = max(1, snapshot_every)
        self.steps: list[int] = []
        self.times: list[float] = []
        self.lenders: list[int] = []
        self.potentials: list[float] = []
        self.gaps: list[float] = []
        self.snapshots: list[tuple[int, np.ndarray]] = []

    def record(self, step, time, lender, phi, gap, profile):
        self.steps.append(step)
        self.times.append(time)
        self.lenders.append(lender)
        self.potentials.append(phi)
        self.gaps.append(gap)
        if step % self.snapshot_every == 0:
            self.snapshots.append((step, profile.copy()))

    def build(self, final_profile, status) -> Trajectory:
        return Trajectory(
            steps=np.array(self.steps, dtype=int),
            times=np.array(self.times),
            lenders=np.array(self.lenders, dtype=int),
            potentials=np.array(self.potentials),
            lyapunov_gaps=np.array(self.gaps),
            snapshots=self.snapshots,
            final_profile=final_profile,
            status=status,
        )


def step_eager(game: LendingGame, profile: np.ndarray, alpha: float) -> tuple[np.ndarray, int, float]:
    """One eager update: the lender with the highest best-response gain
    (lowest index on ties) blends a fraction alpha toward its best response.
    Returns (new profile, chosen lender, that lender's gain)."""
    s = np.asarray(profile, dtype=float)
    gains = best_response_gains(game, s)
    i = int(np.argmax(gains))  # argmax takes the first maximum: lowest index
    target = best_response(game, s, i)
    out = s.copy()
    out[i] = s[i] + alpha * (target - s[i])
    return out, i, float(gains[i])


def step_randomised(
    game: LendingGame,
    profile: np.ndarray,
    alpha: float,
    weights: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """One randomised update: draw the lender from the given distribution
    and apply the same alpha-blend toward its best response."""
    s = np.asarray(profile, dtype=float)
    i = int(rng.choice(game.m, p=weights))
    target = best_response(game, s, i)
    out = s.copy()
    out[i] = s[i] + alpha * (target - s[i])
    return out, i


def step_pseudo_gradient(
    game: LendingGame,
    profile: np.ndarray,
    pg_weights: np.ndarray,
    pg_step: float,
) -> np.ndarray:
    """One synchronous pseudo-gradient step: every lender moves along its
    weighted utility gradient, then is projected back onto its budget set."""
    if pg_step > pg_step_bound(game, pg_weights):
        raise ValueError("pg_step exceeds the stability bound")
    s = np.asarray(profile, dtype=float)
    col = s.sum(axis=0)
    grad = (game.rate_min - game.rate_max) * ((s + col) / game.demands - 1.0)
    moved = s + pg_step * np.asarray(pg_weights)[:, None] * grad
    out = np.empty_like(moved)
    for i in range(game.m):
        out[i] = project_capped_simplex(moved[i], float(game.budgets[i]))
    return out


def integrate_continuous(
    game: LendingGame,
    initial_profile: np.ndarray,
    ode_step: float = 0.01,
    horizon: float = 50.0,
    residual_tol: float = 0.0,
    snapshot_every: int = 10,
) -> Trajectory:
    """Integrate ds_i/dt = BR_i(s) - s_i with classical fixed-step RK4.

    Stops at the horizon, or earlier once the largest per-lender sup-norm
    best-response residual drops to residual_tol.  Records the Lyapunov gap
    against the closed-form equilibrium at every step.
    """
    s = validate_profile(game, initial_profile).copy()
    h = float(ode_step)
    if h <= 0:
        raise ValueError("ode_step must be positive")
    phi_star = potential(game, solve_equilibrium(game).profile)
    rec = _Recorder(snapshot_every)

    def field_at(x):
        return best_response_profile(game, x) - x

    n_steps = int(round(horizon / h))
    rec.record(0, 0.0, -1, potential(game, s), phi_star - potential(game, s), s)
    status = STATUS_ITERATION_CAP
    for k in range(1, n_steps + 1):
        k1 = field_at(s)
        k2 = field_at(s + 0.5 * h * k1)
        k3 = field_at(s + 0.5 * h * k2)
        k4 = field_at(s + h * k3)
        s = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        # RK4 can leave the feasible set by integrator error only; clip it.
        np.clip(s, 0.0, None, out=s)
        excess = s.sum(axis=1) / game.budgets
        over = excess > 1.0
        if over.any():
            s[over] /= excess[over, None]
        phi = potential(game, s)
        rec.record(k, k * h, -1, phi, phi_star - phi, s)
        if np.abs(field_at(s)).max() <= residual_tol:
            status = STATUS_CONVERGED
            break
    else:
        if residual_tol <= 0.0:
            status = STATUS_CONVERGED  # ran to the requested horizon
    return rec.build(s, status)


def run(game: LendingGame, initial_profile: np.ndarray, config: DynamicsConfig) -> Trajectory:
    """Run the configured variant until the Lyapunov gap falls below
    stop_gap or the iteration cap is hit (the latter is reported in the
    trajectory status, not raised)."""
    cfg = config.resolved(game)
    s = validate_profile(game, initial_profile).copy()

    if cfg.variant == "continuous":
        traj = integrate_continuous(
            game, s, cfg.ode_step, cfg.horizon, snapshot_every=cfg.snapshot_every
        )
        status = STATUS_CONVERGED if traj.final_gap <= cfg.stop_gap else STATUS_ITERATION_CAP
        traj.status = status
        return traj

    phi_star = potential(game, solve_equilibrium(game).profile)
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    rec = _Recorder(cfg.snapshot_every)
    phi = potential(game, s)
    rec.record(0, 0.0, -1, phi, phi_star - phi, s)
    status = STATUS_ITERATION_CAP
    for t in range(1, cfg.max_iters + 1):
        if cfg.variant == "eager":
            s, lender, _ = step_eager(game, s, cfg.alpha)
        elif cfg.variant == "randomised":
            s, lender = step_randomised(game, s, cfg.alpha, cfg.lender_weights, rng)
        else:
            s = step_pseudo_gradient(game, s, cfg.pg_weights, cfg.pg_step)
            lender = -1
        phi = potential(game, s)
        gap = phi_star - phi
        rec.record(t, float(t), lender, phi, gap, s)
        if gap <= cfg.stop_gap:
            status = STATUS_CONVERGED
            break
    return rec.build(s, status)
