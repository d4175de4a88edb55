"""Independent ground truth at desk scale.

Two routes that share no code with the PDE solvers or the bisection layer:

* closed forms for the one-mode reduction (full-interval control, no reaction
  term, initial data on the first eigenfunction), where the optimal control is
  constant full thrust and the minimal time / minimal norm are elementary;
* a brute-force enumerator over a finite family of low-mode controls,
  integrated with RK4 on the mode amplitudes, which brackets the minimal norm
  between the largest infeasible and the smallest feasible level of a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatchError,
    EnumerationBudgetError,
    NonlinearitySpec,
    SpatialGrid,
    TargetBall,
)
from .pde import dirichlet_eigs


@dataclass(frozen=True)
class ScalarInstance:
    """One-mode reduction: amplitude a0 decaying at rate lam toward radius r."""

    a0: float
    r: float
    lam: float

    def __post_init__(self):
        if not self.a0 > self.r > 0.0:
            raise ValueError(f"need a0 > r > 0, got a0={self.a0}, r={self.r}")
        if self.lam <= 0.0:
            raise ValueError(f"decay rate must be positive, got {self.lam}")

    @property
    def free_decay_time(self) -> float:
        return math.log(self.a0 / self.r) / self.lam


def scalar_minimal_time(inst: ScalarInstance, M: float) -> float:
    """Minimal time for a' = -lam*a + u, |u| <= M, from a0 down to r.

    Full thrust u = -M is optimal; integrating the resulting linear equation
    gives (1/lam) * log((a0 + M/lam) / (r + M/lam)).
    """
    if M < 0.0:
        raise ValueError(f"norm bound must be nonnegative, got {M}")
    shift = M / inst.lam
    return math.log((inst.a0 + shift) / (inst.r + shift)) / inst.lam


def scalar_minimal_norm(inst: ScalarInstance, T: float) -> float:
    """Algebraic inverse of :func:`scalar_minimal_time` on (0, free-decay time]."""
    if not 0.0 < T <= inst.free_decay_time:
        raise ValueError(
            f"horizon {T} outside (0, {inst.free_decay_time:.6g}]; "
            "the minimal norm is 0 or undefined there"
        )
    decay = math.exp(-inst.lam * T)
    return inst.lam * (inst.a0 * decay - inst.r) / (1.0 - decay)


@dataclass(frozen=True)
class LevelBracket:
    """Bracket on the minimal norm from a level grid.

    ``lower`` is the largest level at which every enumerated control fails,
    ``upper`` the smallest at which one succeeds.  ``lower`` is None when even
    the smallest level succeeds; ``upper`` is None when every level fails
    (value above the grid).
    """

    lower: float | None
    upper: float | None
    levels: tuple[float, ...]
    feasible_by_level: tuple[bool, ...]
    candidates: int
    evaluations: int


def bruteforce_minimal_norm_bracket(y0: np.ndarray, T: float, k_modes: int,
                                    m_intervals: int, amp_grid, levels,
                                    f: NonlinearitySpec, g: SpatialGrid,
                                    ball: TargetBall, n_steps: int = 160,
                                    budget: int = 10_000_000,
                                    chunk: int = 4096) -> LevelBracket:
    """Enumerate low-mode piecewise-constant controls and bracket the minimal norm.

    Dynamics are projected on the first ``k_modes`` eigenfunctions, with the
    reaction term evaluated on the grid and reprojected each stage.  Controls
    are piecewise constant on ``m_intervals`` equal time slices with spatial
    profiles in the span of the masked eigenfunctions; the coefficient of each
    of the k*m degrees of freedom ranges over ``amp_grid``.  A candidate
    counts toward a level when its largest pointwise norm stays below it, so
    feasibility per level is monotone and a single enumeration pass brackets
    the minimal norm between adjacent grid levels.

    The bracket is exact for the enumerated family only: pick levels the
    amplitude grid can realize (e.g. a subset of its absolute values),
    otherwise the bracket is biased toward larger values.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (g.n,):
        raise DimensionMismatchError(f"initial state has shape {y0.shape}, expected ({g.n},)")
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    amp_grid = np.asarray(sorted(float(a) for a in amp_grid))
    levels = tuple(sorted(float(l) for l in levels))
    if len(levels) == 0:
        raise ValueError("need at least one level to bracket")
    if any(l < 0.0 for l in levels):
        raise ValueError("levels must be nonnegative")

    dof = k_modes * m_intervals
    n_candidates = len(amp_grid) ** dof
    if n_candidates * max(len(levels), 1) > budget:
        raise EnumerationBudgetError(
            f"{len(amp_grid)}^{dof} candidates x {len(levels)} levels exceeds "
            f"the budget of {budget} evaluations"
        )

    spec = dirichlet_eigs(g, k_modes)
    modes = spec.eigenvectors                     # (k, n)
    lam = spec.eigenvalues                        # (k,)
    masked_modes = modes * g.omega_mask           # control profile basis
    # Modal forcing of profile sum_j c_j * masked_mode_j, and its gram for norms.
    forcing_map = g.h * modes @ masked_modes.T    # (k, k): row i = <masked e_j, e_i>
    gram = g.h * masked_modes @ masked_modes.T    # (k, k)

    a0 = g.h * modes @ y0                         # initial mode amplitudes

    # All coefficient tuples, laid out as (n_candidates, m, k).
    grids = np.meshgrid(*([amp_grid] * dof), indexing="ij")
    coeffs = np.stack([q.ravel() for q in grids], axis=-1).reshape(n_candidates,
                                                                   m_intervals, k_modes)
    # Pointwise control norm on each slice, maximized over slices.
    slice_sq = np.einsum("cmi,ij,cmj->cm", coeffs, gram, coeffs)
    candidate_level = np.sqrt(np.maximum(slice_sq, 0.0).max(axis=1))

    steps_per_slice = max(1, -(-n_steps // m_intervals))
    dt = T / (steps_per_slice * m_intervals)

    if f.kind == "zero":
        def rhs(a, force):
            return -(a * lam) + force
    else:
        def rhs(a, force):
            # a: (c, k); reaction evaluated on the grid and reprojected.
            y = a @ modes
            fy = f.f(y)
            return -(a * lam) - g.h * (fy @ modes.T) + force

    terminal = np.empty(n_candidates)
    evaluations = 0
    for start in range(0, n_candidates, chunk):
        stop = min(start + chunk, n_candidates)
        a = np.tile(a0, (stop - start, 1))
        forces = np.einsum("ij,cmj->cmi", forcing_map, coeffs[start:stop])
        for m in range(m_intervals):
            force = forces[:, m, :]
            for _ in range(steps_per_slice):
                k1 = rhs(a, force)
                k2 = rhs(a + 0.5 * dt * k1, force)
                k3 = rhs(a + 0.5 * dt * k2, force)
                k4 = rhs(a + dt * k3, force)
                a = a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        terminal[start:stop] = np.sqrt(np.einsum("ci,ci->c", a, a))
        evaluations += (stop - start) * steps_per_slice * m_intervals

    reaches = terminal <= ball.r
    feasible_by_level = tuple(
        bool(np.any(reaches & (candidate_level <= lvl * (1.0 + 1e-12))))
        for lvl in levels
    )
    lower = None
    upper = None
    for lvl, ok in zip(levels, feasible_by_level):
        if ok:
            upper = lvl
            break
        lower = lvl
    return LevelBracket(lower=lower, upper=upper, levels=levels,
                        feasible_by_level=feasible_by_level,
                        candidates=n_candidates, evaluations=evaluations)
