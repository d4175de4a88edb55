"""Forward and adjoint integrators for the controlled 1D semilinear heat equation.

Space: standard second-order finite differences on the interior nodes of a
uniform Dirichlet grid.  Time: backward Euler for diffusion (unconditionally
stable and monotone), explicit evaluation of the reaction term.  Each forward
step is

    z_k   = y_k + dt * (masked control profile)
    y_k+1 = (I + dt*A)^{-1} (z_k - dt * f(z_k))

where A is the discrete negative Laplacian.  The reaction is evaluated at the
source-augmented stage z_k, and z_k is cached on the trajectory, so the
transposed step operators give a discrete adjoint whose duality identity
holds to machine precision (see :func:`solve_adjoint`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .core import (
    ControlSignal,
    DimensionMismatchError,
    NonlinearitySpec,
    SolverDivergenceError,
    SpatialGrid,
    StateTrajectory,
    TargetBall,
)


@dataclass(frozen=True)
class DirichletSpectrum:
    """Leading eigenpairs of the discrete negative Laplacian.

    Eigenvalues are sorted increasingly; eigenvectors are rows, orthonormal in
    the h-weighted inner product, with a nonnegative first component.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class AdjointTrajectory:
    """Backward costate trajectory; costates[nt] is the terminal datum."""

    dt: float
    nt: int
    costates: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.costates, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "costates", arr)
        if self.costates.shape[0] != self.nt + 1:
            raise DimensionMismatchError("adjoint trajectory must hold nt+1 costates")


def dirichlet_eigs(g: SpatialGrid, k: int) -> DirichletSpectrum:
    """First k eigenpairs of the tridiagonal (1/h^2)[-1, 2, -1] operator.

    Closed forms on the uniform grid: lambda_i = (2/h^2)(1 - cos(i*pi*h/ell))
    and discretely normalized sine vectors.
    """
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if k > g.n:
        raise DimensionMismatchError(f"requested {k} eigenpairs on a grid with n={g.n}")
    i = np.arange(1, k + 1)
    lam = (2.0 / g.h ** 2) * (1.0 - np.cos(i * np.pi * g.h / g.ell))
    j = np.arange(1, g.n + 1)
    vecs = np.sin(np.outer(i, j) * np.pi / (g.n + 1)) * math.sqrt(2.0 / g.ell)
    return DirichletSpectrum(eigenvalues=lam, eigenvectors=vecs)


def principal_eigenvalue(g: SpatialGrid) -> float:
    """Smallest eigenvalue of the discrete negative Laplacian."""
    return (2.0 / g.h ** 2) * (1.0 - math.cos(math.pi * g.h / g.ell))


def laplacian_matrix(g: SpatialGrid) -> np.ndarray:
    """Dense discrete negative Laplacian (for residual checks on small grids)."""
    a = np.zeros((g.n, g.n))
    idx = np.arange(g.n)
    a[idx, idx] = 2.0
    a[idx[:-1], idx[:-1] + 1] = -1.0
    a[idx[:-1] + 1, idx[:-1]] = -1.0
    return a / g.h ** 2


def diffusion_factor(g: SpatialGrid, dt: float):
    """Banded Cholesky factor of (I + dt*A), reused across time steps."""
    r = dt / g.h ** 2
    ab = np.zeros((2, g.n))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    return cholesky_banded(ab, lower=False)


def diffusion_solve(factor, b: np.ndarray) -> np.ndarray:
    """Apply (I + dt*A)^{-1}; the operator is symmetric."""
    return cho_solve_banded((factor, False), b, check_finite=False)


def solve_forward(y0: np.ndarray, u: ControlSignal, f: NonlinearitySpec,
                  g: SpatialGrid) -> StateTrajectory:
    """Integrate the controlled equation over the control's time grid.

    Raises :class:`SolverDivergenceError` on non-finite states, which cannot
    occur for a dissipative reaction term unless dt is far too large.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (g.n,):
        raise DimensionMismatchError(f"initial state has shape {y0.shape}, expected ({g.n},)")
    if u.grid.n != g.n:
        raise DimensionMismatchError("control was built on a different grid")
    nt, dt = u.nt, u.dt
    factor = diffusion_factor(g, dt)
    states = np.empty((nt + 1, g.n))
    stages = np.empty((nt, g.n))
    states[0] = y0
    y = y0
    vals = u.values
    for k in range(nt):
        z = y + dt * vals[k]
        stages[k] = z
        y = diffusion_solve(factor, z - dt * f.f(z))
        states[k + 1] = y
    if not np.isfinite(states).all():
        raise SolverDivergenceError("forward solve produced non-finite states; reduce dt")
    norms = np.sqrt(g.h * np.einsum("ij,ij->i", states, states))
    return StateTrajectory(dt=dt, nt=nt, states=states, norms=norms, stage_states=stages)


def solve_adjoint(y: StateTrajectory, xi: np.ndarray, f: NonlinearitySpec,
                  g: SpatialGrid) -> AdjointTrajectory:
    """Exact discrete adjoint of the forward scheme linearized along y.

    Runs terminal-to-initial with the transposed step operators and the
    reaction derivative frozen at the cached stage states.  It is linear in
    the terminal datum and satisfies, for tangent perturbations (dy0, du) with
    linearized response y_lin,

        <y_lin(T), xi> = <dy0, psi(0)> + sum_k dt * <masked du(t_k), psi(t_k)>

    to machine precision; this identity is what the reachability gradients
    rely on.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (g.n,):
        raise DimensionMismatchError(f"terminal datum has shape {xi.shape}, expected ({g.n},)")
    nt, dt = y.nt, y.dt
    factor = diffusion_factor(g, dt)
    costates = np.empty((nt + 1, g.n))
    costates[nt] = xi
    psi = xi
    for k in range(nt - 1, -1, -1):
        w = diffusion_solve(factor, psi)
        psi = w - dt * f.fprime(y.stage_states[k]) * w
        costates[k] = psi
    return AdjointTrajectory(dt=dt, nt=nt, costates=costates)


def hitting_time(y: StateTrajectory, ball: TargetBall) -> float | None:
    """First time the cached norm trajectory crosses into the ball.

    Sub-step resolution by linear interpolation of the norm between the
    bracketing steps; None when there is no crossing on the horizon.
    """
    norms = y.norms
    r = ball.r
    if norms[0] <= r:
        return 0.0
    inside = np.nonzero(norms <= r)[0]
    if inside.size == 0:
        return None
    k = int(inside[0])
    n_prev, n_here = norms[k - 1], norms[k]
    frac = (n_prev - r) / (n_prev - n_here)
    return (k - 1 + frac) * y.dt


@dataclass(frozen=True)
class EnvelopeReport:
    """Gap between the norm trajectory and its exponential decay envelope."""

    max_gap: float
    limit: float
    initial_norm: float
    passed: bool


def decay_envelope_check(y: StateTrajectory, g: SpatialGrid, tol: float) -> EnvelopeReport:
    """max_k (||y(t_k)|| - e^{-lambda_1 t_k} ||y0||); passes iff <= tol*||y0||.

    Meaningful for uncontrolled runs with a dissipative reaction term, where
    the envelope bounds the continuum dynamics.
    """
    lam1 = principal_eigenvalue(g)
    envelope = y.norms[0] * np.exp(-lam1 * y.times)
    max_gap = float(np.max(y.norms - envelope))
    limit = tol * y.norms[0]
    return EnvelopeReport(max_gap=max_gap, limit=limit,
                          initial_norm=float(y.norms[0]), passed=max_gap <= limit)


@dataclass(frozen=True)
class AprioriBoundReport:
    """Energy bound on a trajectory driven by a norm-bounded control.

    ``bound`` uses the squared control bound, sqrt(M^2*T/2 + ||y0||^2)*e^T.
    ``linear_form_bound`` records the variant with M in place of M^2, which is
    tighter for M > 1 and is reported for reference only.
    """

    sup_norm: float
    bound: float
    passed: bool
    linear_form_bound: float
    linear_form_holds: bool


def apriori_bound_check(y: StateTrajectory, M: float, T: float) -> AprioriBoundReport:
    """Check sup_k ||y(t_k)|| against the Gronwall energy bound."""
    if M < 0.0:
        raise ValueError(f"norm bound must be nonnegative, got {M}")
    sup_norm = float(np.max(y.norms))
    n0_sq = float(y.norms[0]) ** 2
    bound = math.sqrt(M ** 2 * T / 2.0 + n0_sq) * math.exp(T)
    alt = math.sqrt(M * T / 2.0 + n0_sq) * math.exp(T)
    return AprioriBoundReport(
        sup_norm=sup_norm,
        bound=bound,
        passed=sup_norm <= bound,
        linear_form_bound=alt,
        linear_form_holds=sup_norm <= alt,
    )


@dataclass(frozen=True)
class ScalingGapReport:
    """Gap between trajectories driven by u and by theta*u, against the Gronwall bound."""

    sup_gap: float
    bound: float
    theta: float
    level: float
    passed: bool


def control_scaling_gap(y0: np.ndarray, u: ControlSignal, theta: float,
                        f: NonlinearitySpec, g: SpatialGrid) -> ScalingGapReport:
    """sup_k ||y(t_k; u) - y(t_k; theta*u)|| <= (1-theta)*M*sqrt(T)*e^{(2L+1)T/2}.

    M is the largest pointwise norm of u and T its horizon.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"scaling factor must lie in [0, 1], got {theta}")
    scaled = ControlSignal(dt=u.dt, nt=u.nt, values=theta * u.values, grid=u.grid)
    traj_full = solve_forward(y0, u, f, g)
    traj_scaled = solve_forward(y0, scaled, f, g)
    diff = traj_full.states - traj_scaled.states
    sup_gap = float(np.max(np.sqrt(g.h * np.einsum("ij,ij->i", diff, diff))))
    level = float(np.max(u.step_norms()))
    T = u.horizon
    bound = (1.0 - theta) * level * math.sqrt(T) * math.exp((2.0 * f.L + 1.0) * T / 2.0)
    return ScalingGapReport(sup_gap=sup_gap, bound=bound, theta=theta,
                            level=level, passed=sup_gap <= bound)
