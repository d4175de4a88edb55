"""Reachability oracle: can controls bounded pointwise by M reach the ball at T?

Decided by projected gradient descent on J(v) = 0.5*||y(T; v)||^2 over the set
{v : ||v(t_k)|| <= M for all k}.  The gradient of J is the masked costate from
the exact discrete adjoint, so descent directions are correct to machine
precision and the only sources of looseness are the iteration budget and, for
nonlinear reaction terms, nonconvexity.  The mitigation for the latter is to
warm-start both from the zero control and from a full-amplitude control
aligned with the costate of the uncontrolled run, and keep the better one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ControlSignal,
    DimensionMismatchError,
    NonlinearitySpec,
    SolverDivergenceError,
    SpatialGrid,
    TargetBall,
)
from .pde import principal_eigenvalue, solve_adjoint, solve_forward


@dataclass(frozen=True)
class ReachOptions:
    """Iteration and tolerance knobs for the oracle.

    ``eps_feas_rel`` is relative to the target radius; stagnation is measured
    by the norm of the accepted step relative to M*sqrt(T).
    """

    max_iters: int = 200
    step_init: float | None = None
    step_shrink: float = 0.5
    step_growth: float = 2.0
    max_backtracks: int = 45
    eps_stag: float = 1e-7
    eps_feas_rel: float = 1e-3

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration budgets must be positive")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.step_growth < 1.0:
            raise ValueError("step_growth must be >= 1")
        if self.eps_stag <= 0.0 or self.eps_feas_rel <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.step_init is not None and self.step_init <= 0.0:
            raise ValueError("step_init must be positive")


@dataclass(frozen=True)
class ReachResult:
    """Outcome of one oracle call.

    ``feasible`` means the achieved terminal norm is within the feasibility
    slack of the ball; ``converged`` means the iteration ended at feasibility
    or stationarity rather than exhausting its budget, so an infeasible
    non-converged result is inconclusive rather than a certificate.
    """

    terminal_norm: float
    control: ControlSignal
    iterations: int
    feasible: bool
    converged: bool
    objective_history: tuple[float, ...]

    @property
    def inconclusive(self) -> bool:
        return not self.feasible and not self.converged


def _project_values(values: np.ndarray, M: float, h: float) -> np.ndarray:
    """Radially rescale every step whose pointwise norm exceeds M."""
    norms = np.sqrt(h * np.einsum("ij,ij->i", values, values))
    scale = np.where(norms > M, np.divide(M, norms, out=np.ones_like(norms),
                                          where=norms > 0.0), 1.0)
    return values * scale[:, None]


def project_pointwise(u: ControlSignal, M: float) -> ControlSignal:
    """Project onto the pointwise norm ball of radius M; idempotent."""
    if M < 0.0:
        raise ValueError(f"norm bound must be nonnegative, got {M}")
    return ControlSignal(dt=u.dt, nt=u.nt,
                         values=_project_values(u.values, M, u.grid.h), grid=u.grid)


def _bangbang_from_free_run(y0, nt, dt, M, f, g):
    """Full-amplitude descent control aligned against the free run's costate.

    Returns None when the masked costate degenerates somewhere (no usable
    direction).
    """
    free = solve_forward(y0, ControlSignal.zeros(nt, dt, g), f, g)
    psi = solve_adjoint(free, free.states[-1], f, g)
    masked = psi.costates[:nt] * g.omega_mask
    norms = np.sqrt(g.h * np.einsum("ij,ij->i", masked, masked))
    if np.min(norms) < 1e-14:
        return None
    return -M * masked / norms[:, None]


def _resample_steps(values: np.ndarray, nt: int) -> np.ndarray:
    """Nearest-step resample of a piecewise-constant control onto nt steps."""
    if values.shape[0] == nt:
        return values
    src = np.minimum((np.arange(nt) * values.shape[0]) // nt, values.shape[0] - 1)
    return values[src]


def min_terminal_norm(y0: np.ndarray, T: float, M: float, ball: TargetBall,
                      f: NonlinearitySpec, g: SpatialGrid,
                      opts: ReachOptions | None = None, nt: int = 300,
                      warm_start: ControlSignal | None = None) -> ReachResult:
    """Minimize the terminal norm over pointwise-bounded controls.

    Terminates early as feasible once J drops below 0.5*(r - eps_feas)^2,
    otherwise on stagnation of the projected step or on the iteration budget.
    Backtracking enforces a non-increasing objective sequence.
    """
    if opts is None:
        opts = ReachOptions()
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if M < 0.0:
        raise ValueError(f"norm bound must be nonnegative, got {M}")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (g.n,):
        raise DimensionMismatchError(f"initial state has shape {y0.shape}, expected ({g.n},)")

    dt = T / nt
    h = g.h
    r = ball.r
    eps_feas = opts.eps_feas_rel * r
    target_j = 0.5 * max(r - eps_feas, 0.0) ** 2

    def run(values):
        traj = solve_forward(y0, ControlSignal(dt=dt, nt=nt, values=values, grid=g), f, g)
        j = 0.5 * float(traj.norms[-1]) ** 2
        if not math.isfinite(j):
            raise SolverDivergenceError("terminal objective is not finite")
        return j, traj

    # Warm starts: zero control, bang-bang against the free costate, and the
    # caller's control (projected); keep the best.
    candidates = [np.zeros((nt, g.n))]
    if M > 0.0:
        bb = _bangbang_from_free_run(y0, nt, dt, M, f, g)
        if bb is not None:
            candidates.append(bb)
        if warm_start is not None:
            ws = _resample_steps(warm_start.values, nt) * g.omega_mask
            candidates.append(_project_values(ws, M, h))
    v, j, traj = None, math.inf, None
    for cand in candidates:
        j_c, traj_c = run(cand)
        if j_c < j:
            v, j, traj = cand, j_c, traj_c
    history = [j]

    if M == 0.0:
        terminal = float(traj.norms[-1])
        return ReachResult(terminal_norm=terminal,
                           control=ControlSignal(dt=dt, nt=nt, values=v, grid=g),
                           iterations=0, feasible=terminal <= r + eps_feas,
                           converged=True, objective_history=tuple(history))

    step = opts.step_init if opts.step_init is not None else 1.0 / principal_eigenvalue(g)
    step_cap = step * 1e4
    move_scale = M * math.sqrt(T)
    iterations = 0
    converged = False
    for _ in range(opts.max_iters):
        if j <= target_j:
            converged = True
            break
        psi = solve_adjoint(traj, traj.states[-1], f, g)
        grad = psi.costates[:nt] * g.omega_mask
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = _project_values(v - step * grad, M, h)
            j_trial, traj_trial = run(trial)
            if j_trial <= j:
                accepted = True
                break
            step *= opts.step_shrink
        iterations += 1
        if not accepted:
            converged = True  # no descent at a vanishing step: stationary
            break
        move = math.sqrt(dt * h * float(np.sum((trial - v) ** 2)))
        v, j, traj = trial, j_trial, traj_trial
        history.append(j)
        step = min(step * opts.step_growth, step_cap)
        if move <= opts.eps_stag * move_scale:
            converged = True
            break
    else:
        converged = j <= target_j

    terminal = float(traj.norms[-1])
    return ReachResult(terminal_norm=terminal,
                       control=ControlSignal(dt=dt, nt=nt, values=v, grid=g),
                       iterations=iterations, feasible=terminal <= r + eps_feas,
                       converged=converged, objective_history=tuple(history))


def feasible(y0: np.ndarray, T: float, M: float, ball: TargetBall,
             f: NonlinearitySpec, g: SpatialGrid,
             opts: ReachOptions | None = None, nt: int = 300,
             warm_start: ControlSignal | None = None) -> bool:
    """Thin wrapper over :func:`min_terminal_norm`."""
    return min_terminal_norm(y0, T, M, ball, f, g, opts=opts, nt=nt,
                             warm_start=warm_start).feasible


def gradient_fd_check(y0: np.ndarray, T: float, v: ControlSignal,
                      direction: ControlSignal, f: NonlinearitySpec,
                      g: SpatialGrid, fd_step: float = 1e-5) -> float:
    """Relative error between the adjoint directional derivative and central FD.

    The direction must live on the same step grid as v; both are supported on
    the control region by construction.
    """
    if v.nt != direction.nt:
        raise DimensionMismatchError("control and direction use different step counts")
    y0 = np.asarray(y0, dtype=float)
    nt = v.nt
    dt = T / nt

    def objective(values):
        traj = solve_forward(y0, ControlSignal(dt=dt, nt=nt, values=values, grid=g), f, g)
        return 0.5 * float(traj.norms[-1]) ** 2, traj

    j0, traj = objective(v.values)
    psi = solve_adjoint(traj, traj.states[-1], f, g)
    grad = psi.costates[:nt] * g.omega_mask
    adjoint_slope = dt * g.h * float(np.sum(grad * direction.values))

    j_plus, _ = objective(v.values + fd_step * direction.values)
    j_minus, _ = objective(v.values - fd_step * direction.values)
    fd_slope = (j_plus - j_minus) / (2.0 * fd_step)

    denom = max(abs(fd_slope), abs(adjoint_slope))
    if denom == 0.0:
        return 0.0
    return abs(adjoint_slope - fd_slope) / denom
