"""Preconditioned primal-dual solver for the tropical Wasserstein-1 distance.

Solves the minimal-flux problem on a 2-D grid

    minimize    sum_cells trop_norm(m at the cell's outgoing faces)
    subject to  div(m) + q1 - q0 = 0,   zero flux through the walls,

by alternating a closed-form tropical shrink on the flux with a dual ascent
on the potential through an exact inverse Neumann Laplacian (an H^1-norm
proximal step).  The shrink acts on each cell's vector of free outgoing
faces; cells on the far walls have some faces pinned to zero and are shrunk
in the reduced coordinates (for one free face the tropical norm is the
absolute value, so the update degenerates to soft thresholding).

The iteration stops once the relative change of the objective falls below
``eps`` and the constraint residual is within ``feas_tol`` (default
``10 * eps``), so feasibility at convergence is guaranteed rather than
incidental.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    DensityField,
    FluxField,
    GridSpec,
    Potential,
    div_arrays,
    grad_arrays,
    laplacian_arrays,
    solve_neumann_poisson,
)
from .pdhg import (
    ConvergenceReport,
    InfeasibleProblemError,
    SolverConfig,
    estimate_opnorm_sq,
    relative_change,
)

__all__ = ["W1Problem", "W1Solution", "solve_w1", "eikonal_residual"]

DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITER = 100_000
MASS_MISMATCH_TOL = 1e-9


@dataclass(frozen=True)
class W1Problem:
    """Pair of probability densities on a common 2-D grid."""

    q0: DensityField
    q1: DensityField

    def __post_init__(self):
        if self.q0.grid != self.q1.grid:
            raise ValueError("q0 and q1 must share a grid")
        if self.q0.grid.ndim != 2:
            raise ValueError("the W1 solver supports 2-D grids")

    @property
    def grid(self) -> GridSpec:
        return self.q0.grid


@dataclass(frozen=True)
class W1Solution:
    m: FluxField
    phi: Potential
    distance: float
    report: ConvergenceReport


def _percell_norm(f0: np.ndarray, f1: np.ndarray, shape) -> np.ndarray:
    """Tropical norm of each cell's outgoing-face pair (walls count as 0)."""
    n0, n1 = shape
    a = np.zeros(shape)
    b = np.zeros(shape)
    a[: n0 - 1, :] = f0
    b[:, : n1 - 1] = f1
    hi = np.maximum(np.maximum(a, b), 0.0)
    lo = np.minimum(np.minimum(a, b), 0.0)
    return hi - lo


def _soft_threshold(c: np.ndarray, h: float) -> np.ndarray:
    # 1-D tropical shrink: the norm is |.|, so this is plain soft thresholding
    return h * np.sign(c) * np.maximum(np.abs(c) - 1.0, 0.0)


def _shrink_grouped(c0: np.ndarray, c1: np.ndarray, h: float, shrink_pairs):
    """Apply the tropical shrink per cell on the free outgoing faces."""
    n0 = c0.shape[0] + 1
    n1 = c1.shape[1] + 1
    new0 = np.empty_like(c0)
    new1 = np.empty_like(c1)
    pairs = np.stack([c0[:, : n1 - 1], c1[: n0 - 1, :]], axis=-1)
    shrunk = shrink_pairs(pairs, h)
    new0[:, : n1 - 1] = shrunk[..., 0]
    new1[: n0 - 1, :] = shrunk[..., 1]
    new0[:, n1 - 1] = _soft_threshold(c0[:, n1 - 1], h)
    new1[n0 - 1, :] = _soft_threshold(c1[n0 - 1, :], h)
    return new0, new1


def estimate_w1_opnorm_sq(grid: GridSpec, seed: int = 0, method: str = "dct") -> float:
    """Preconditioned norm of the divergence, ``norm((-Lap)^(-1/2) div)^2``."""
    dx = grid.dx

    def kkt(w):
        # K = div, K^T = -grad, so K K^T = -div(grad(.))
        gx = grad_arrays(w, dx)
        return div_arrays(tuple(-g for g in gx), dx, grid.shape)

    def inv(w):
        return solve_neumann_poisson(w, dx, method=method)

    def minus_lap(w):
        return -laplacian_arrays(w, dx)

    return estimate_opnorm_sq(kkt, inv, minus_lap, grid.shape, seed=seed)


def solve_w1(problem: W1Problem, cfg: SolverConfig | None = None) -> W1Solution:
    """Run the primal-dual iteration until the objective settles.

    Returns the optimal flux, the dual potential, the distance value and a
    convergence report; a run that hits ``max_iter`` comes back with
    ``report.converged`` false rather than raising.
    """
    from .prox import tropical_shrink

    cfg = cfg or SolverConfig()
    grid = problem.grid
    dx = grid.dx
    q0 = problem.q0.values
    q1 = problem.q1.values
    if abs(q0.sum() - q1.sum()) > MASS_MISMATCH_TOL:
        raise InfeasibleProblemError(
            f"mass mismatch: {q0.sum()!r} vs {q1.sum()!r}"
        )

    eps = cfg.eps if cfg.eps is not None else DEFAULT_EPS
    max_iter = cfg.max_iter if cfg.max_iter is not None else DEFAULT_MAX_ITER
    feas_tol = cfg.feas_tol if cfg.feas_tol is not None else 10.0 * eps
    opnorm_sq = estimate_w1_opnorm_sq(grid, seed=cfg.seed, method=cfg.poisson_method)
    auto = cfg.step_safety / np.sqrt(opnorm_sq)
    h = cfg.h if cfg.h is not None else auto
    tau = cfg.tau if cfg.tau is not None else auto

    dq = q1 - q0
    f0 = np.zeros(grid.face_shape(0))
    f1 = np.zeros(grid.face_shape(1))
    phi = np.zeros(grid.shape)
    div_old = np.zeros(grid.shape)

    objective = np.empty(max_iter)
    rel_hist = np.empty(max_iter)
    feas_hist = np.empty(max_iter)
    obj_prev: float | None = None
    converged = False
    iterations = 0

    for it in range(max_iter):
        g0, g1 = grad_arrays(phi, dx)
        new0, new1 = _shrink_grouped(f0 + h * g0, f1 + h * g1, h, tropical_shrink)
        div_new = div_arrays((new0, new1), dx, grid.shape)
        rhs = 2.0 * div_new - div_old + dq
        phi += tau * solve_neumann_poisson(rhs, dx, method=cfg.poisson_method)
        f0, f1 = new0, new1
        div_old = div_new

        obj = float(_percell_norm(f0, f1, grid.shape).sum())
        rel = relative_change(obj, obj_prev)
        feas = float(np.abs(div_new + dq).max())
        objective[it] = obj
        rel_hist[it] = rel
        feas_hist[it] = feas
        obj_prev = obj
        iterations = it + 1
        if rel <= eps and feas <= feas_tol:
            converged = True
            break

    report = ConvergenceReport(
        converged=converged,
        iterations=iterations,
        objective=objective[:iterations].copy(),
        relative_error=rel_hist[:iterations].copy(),
        feasibility=feas_hist[:iterations].copy(),
        final_residual=float(feas_hist[iterations - 1]) if iterations else float("nan"),
        h=float(h),
        tau=float(tau),
        opnorm_sq=float(opnorm_sq),
        eps=float(eps),
        feas_tol=float(feas_tol),
    )
    return W1Solution(
        m=FluxField(grid, (f0, f1)),
        phi=Potential(grid, phi),
        distance=float(objective[iterations - 1]) if iterations else 0.0,
        report=report,
    )


def eikonal_residual(sol: W1Solution, active_rel_threshold: float = 0.1) -> float:
    """Deviation of the dual potential from the optimality condition on the
    active set.

    Where flux moves, the dual norm of the potential gradient must be one;
    returns ``max |dual_norm(grad phi) - 1|`` over cells whose per-cell flux
    norm exceeds ``active_rel_threshold`` times the largest one (0 when no
    cell is active).
    """
    grid = sol.m.grid
    f0, f1 = sol.m.faces
    norms = _percell_norm(f0, f1, grid.shape)
    peak = norms.max()
    if peak <= 0.0:
        return 0.0
    active = norms > active_rel_threshold * peak
    if not active.any():
        return 0.0
    g = sol.phi.values
    gv = _cell_vectors_from_grad(g, grid.dx)
    pos = np.where(gv > 0.0, gv, 0.0).sum(axis=-1)
    neg = np.where(gv < 0.0, gv, 0.0).sum(axis=-1)
    dual = np.maximum(pos, -neg)
    return float(np.abs(dual[active] - 1.0).max())


def _cell_vectors_from_grad(phi: np.ndarray, dx: float) -> np.ndarray:
    n0, n1 = phi.shape
    g0 = np.diff(phi, axis=0) / dx
    g1 = np.diff(phi, axis=1) / dx
    out = np.zeros((n0, n1, 2))
    out[: n0 - 1, :, 0] = g0
    out[:, : n1 - 1, 1] = g1
    return out
