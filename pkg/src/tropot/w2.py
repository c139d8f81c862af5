"""Space-time primal-dual solver for the tropical Wasserstein-2 distance.

Solves the dynamic (Benamou-Brenier-type) problem on a 2-D grid with ``n_t``
time slices

    minimize    sum_{slices, cells} trop_norm(m)^2 / (2 rho)
    subject to  d_t rho + div(m) = 0,  rho(0) = q0,  rho(1) = q1,

jointly over the density path and the mass flux.  One iteration performs a
pointwise density update through the positive root of a cubic, a closed-form
flux update (prox of the tropical kinetic term) and a dual ascent with the
inverse space-time Neumann Laplacian as preconditioner.  Time derivatives use
a forward stencil at the first slice, centered stencils inside and a backward
stencil at the last slice; end slices stay pinned to the boundary densities.

``rho`` carries per-cell masses (every slice sums to one at convergence) and
``m`` per-face mass fluxes; the reported distance is
``sqrt(2 * dt * final energy)`` which equals the continuum kinetic action of
the discrete path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    DensityField,
    GridSpec,
    solve_spacetime_poisson,
    spacetime_laplacian_arrays,
    time_derivative,
    time_derivative_matrix,
)
from .pdhg import (
    ConvergenceReport,
    InfeasibleProblemError,
    SolverConfig,
    estimate_opnorm_sq,
    relative_change,
)
from .prox import kinetic_flux_prox, largest_nonneg_root

__all__ = [
    "SpaceTimePath",
    "W2Solution",
    "solve_w2",
    "continuity_residual",
    "hj_inequality_check",
]

DEFAULT_EPS = 1e-5
DEFAULT_MAX_ITER = 200_000
DEFAULT_NT = 15
MASS_MISMATCH_TOL = 1e-9
MU_CAP = 1e12


@dataclass(frozen=True)
class SpaceTimePath:
    """Density/flux/potential path sampled at ``n_t`` time slices.

    ``rho`` has shape ``(n_t, *grid.shape)`` with per-cell masses, ``m`` is a
    pair of per-slice face arrays and ``phi`` the dual potential per slice.
    Slice 0 equals the source density and slice ``n_t - 1`` the target.
    """

    grid: GridSpec
    rho: np.ndarray
    m: tuple[np.ndarray, np.ndarray]
    phi: np.ndarray

    @property
    def n_t(self) -> int:
        return self.rho.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_t)

    @property
    def dt(self) -> float:
        return 1.0 / self.n_t

    def slice_density(self, n: int) -> np.ndarray:
        return self.rho[n]


@dataclass(frozen=True)
class W2Solution:
    path: SpaceTimePath
    distance: float
    report: ConvergenceReport


def _percell_norm_sq(f0: np.ndarray, f1: np.ndarray, shape) -> np.ndarray:
    """Squared tropical norm of each cell's outgoing-face pair, per slice."""
    nt, n0, n1 = shape
    a = np.zeros(shape)
    b = np.zeros(shape)
    a[:, : n0 - 1, :] = f0
    b[:, :, : n1 - 1] = f1
    hi = np.maximum(np.maximum(a, b), 0.0)
    lo = np.minimum(np.minimum(a, b), 0.0)
    return (hi - lo) ** 2


def _grad_slices(phi: np.ndarray, dx: float):
    return np.diff(phi, axis=1) / dx, np.diff(phi, axis=2) / dx


def _div_slices(f0: np.ndarray, f1: np.ndarray, dx: float, shape) -> np.ndarray:
    out = np.zeros(shape)
    out[:, :-1, :] += f0
    out[:, 1:, :] -= f0
    out[:, :, :-1] += f1
    out[:, :, 1:] -= f1
    return out / dx


def _flux_update(c0, c1, mu_cells, dead):
    """Per-cell kinetic prox on the free outgoing faces; ``dead`` marks cells
    whose density hit zero, where the flux must vanish."""
    nt, n0, n1 = mu_cells.shape
    new0 = np.empty_like(c0)
    new1 = np.empty_like(c1)
    pairs = np.stack([c0[:, :, : n1 - 1], c1[:, : n0 - 1, :]], axis=-1)
    shrunk = kinetic_flux_prox(pairs, mu_cells[:, : n0 - 1, : n1 - 1])
    new0[:, :, : n1 - 1] = shrunk[..., 0]
    new1[:, : n0 - 1, :] = shrunk[..., 1]
    # single-face cells: the norm is |.|^2, a plain quadratic shrink
    new0[:, :, n1 - 1] = c0[:, :, n1 - 1] / (1.0 + mu_cells[:, : n0 - 1, n1 - 1])
    new1[:, n0 - 1, :] = c1[:, n0 - 1, :] / (1.0 + mu_cells[:, n0 - 1, : n1 - 1])
    new0[dead[:, : n0 - 1, :]] = 0.0
    new1[dead[:, :, : n1 - 1]] = 0.0
    return new0, new1


def estimate_w2_opnorm_sq(grid: GridSpec, n_t: int, seed: int = 0,
                          method: str = "dct") -> float:
    """Preconditioned norm of the space-time divergence ``(d_t, div)``."""
    dx = grid.dx
    dt = 1.0 / n_t
    dmat = time_derivative_matrix(n_t, dt)
    dmat_t = dmat.T.copy()
    shape = (n_t,) + grid.shape

    def kkt(u):
        tpart = np.einsum("ab,b...->a...", dmat, np.einsum("ab,b...->a...", dmat_t, u))
        g0, g1 = _grad_slices(u, dx)
        spart = -_div_slices(g0, g1, dx, shape)
        return tpart + spart

    def inv(u):
        return solve_spacetime_poisson(u, dx, dt, method=method)

    def minus_lap(u):
        return -spacetime_laplacian_arrays(u, dx, dt)

    return estimate_opnorm_sq(kkt, inv, minus_lap, shape, seed=seed)


def solve_w2(q0: DensityField, q1: DensityField,
             cfg: SolverConfig | None = None) -> W2Solution:
    """Run the space-time primal-dual iteration until the kinetic energy
    settles and the continuity residual is within tolerance."""
    cfg = cfg or SolverConfig()
    if q0.grid != q1.grid:
        raise ValueError("q0 and q1 must share a grid")
    grid = q0.grid
    if grid.ndim != 2:
        raise ValueError("the W2 solver supports 2-D grids")
    if abs(q0.values.sum() - q1.values.sum()) > MASS_MISMATCH_TOL:
        raise InfeasibleProblemError(
            f"mass mismatch: {q0.values.sum()!r} vs {q1.values.sum()!r}"
        )

    n_t = cfg.n_t if cfg.n_t is not None else DEFAULT_NT
    eps = cfg.eps if cfg.eps is not None else DEFAULT_EPS
    max_iter = cfg.max_iter if cfg.max_iter is not None else DEFAULT_MAX_ITER
    feas_tol = cfg.feas_tol if cfg.feas_tol is not None else 10.0 * eps
    dx = grid.dx
    dt = 1.0 / n_t
    shape = (n_t,) + grid.shape

    opnorm_sq = estimate_w2_opnorm_sq(grid, n_t, seed=cfg.seed, method=cfg.poisson_method)
    auto = cfg.step_safety / np.sqrt(opnorm_sq)
    h = cfg.h if cfg.h is not None else auto
    tau = cfg.tau if cfg.tau is not None else auto

    # warm start: linear interpolation between the pinned end densities
    weights = np.linspace(0.0, 1.0, n_t).reshape(-1, 1, 1)
    rho = (1.0 - weights) * q0.values[None] + weights * q1.values[None]
    f0 = np.zeros((n_t,) + grid.face_shape(0))
    f1 = np.zeros((n_t,) + grid.face_shape(1))
    phi = np.zeros(shape)

    energy_hist = np.empty(max_iter)
    rel_hist = np.empty(max_iter)
    feas_hist = np.empty(max_iter)
    energy_prev: float | None = None
    converged = False
    iterations = 0
    rho_floor = tau / MU_CAP

    for it in range(max_iter):
        dphi_t = time_derivative(phi, dt)
        msq = _percell_norm_sq(f0, f1, shape)
        a2 = -(rho[1:-1] + tau * dphi_t[1:-1])
        a0 = -(tau / 2.0) * msq[1:-1]
        rho_new = rho.copy()
        rho_new[1:-1] = largest_nonneg_root(a2, np.zeros_like(a2), a0)

        g0, g1 = _grad_slices(phi, dx)
        mu = tau / np.maximum(rho_new, rho_floor)
        dead = rho_new <= rho_floor
        new0, new1 = _flux_update(f0 + tau * g0, f1 + tau * g1, mu, dead)

        rhs = time_derivative(2.0 * rho_new - rho, dt) \
            + _div_slices(2.0 * new0 - f0, 2.0 * new1 - f1, dx, shape)
        phi += h * solve_spacetime_poisson(rhs, dx, dt, method=cfg.poisson_method)
        rho, f0, f1 = rho_new, new0, new1

        msq = _percell_norm_sq(f0, f1, shape)
        energy = float(np.where(msq > 0.0, msq / (2.0 * np.maximum(rho, 1e-300)), 0.0).sum())
        rel = relative_change(energy, energy_prev)
        feas = float(np.abs(time_derivative(rho, dt)
                            + _div_slices(f0, f1, dx, shape)).max())
        energy_hist[it] = energy
        rel_hist[it] = rel
        feas_hist[it] = feas
        energy_prev = energy
        iterations = it + 1
        if rel <= eps and feas <= feas_tol:
            converged = True
            break

    report = ConvergenceReport(
        converged=converged,
        iterations=iterations,
        objective=energy_hist[:iterations].copy(),
        relative_error=rel_hist[:iterations].copy(),
        feasibility=feas_hist[:iterations].copy(),
        final_residual=float(feas_hist[iterations - 1]) if iterations else float("nan"),
        h=float(h),
        tau=float(tau),
        opnorm_sq=float(opnorm_sq),
        eps=float(eps),
        feas_tol=float(feas_tol),
    )
    energy_final = float(energy_hist[iterations - 1]) if iterations else 0.0
    path = SpaceTimePath(grid=grid, rho=rho, m=(f0, f1), phi=phi)
    return W2Solution(
        path=path,
        distance=float(np.sqrt(2.0 * dt * energy_final)),
        report=report,
    )


def continuity_residual(path: SpaceTimePath) -> float:
    """Largest violation of ``d_t rho + div(m) = 0`` over all slices/cells."""
    shape = path.rho.shape
    return float(np.abs(
        time_derivative(path.rho, path.dt)
        + _div_slices(path.m[0], path.m[1], path.grid.dx, shape)
    ).max())


def hj_inequality_check(path: SpaceTimePath, density_threshold: float = 1e-3) -> float:
    """Largest positive part of ``d_t phi + dual_norm(grad phi)^2 / 2`` on
    cells whose density exceeds ``density_threshold`` (in density units,
    i.e. mass per cell volume); 0 when no cell is active."""
    grid = path.grid
    nt, n0, n1 = path.rho.shape
    dphi_t = time_derivative(path.phi, path.dt)
    g0, g1 = _grad_slices(path.phi, grid.dx)
    gv0 = np.zeros(path.rho.shape)
    gv1 = np.zeros(path.rho.shape)
    gv0[:, : n0 - 1, :] = g0
    gv1[:, :, : n1 - 1] = g1
    pos = np.where(gv0 > 0.0, gv0, 0.0) + np.where(gv1 > 0.0, gv1, 0.0)
    neg = np.where(gv0 < 0.0, gv0, 0.0) + np.where(gv1 < 0.0, gv1, 0.0)
    dual = np.maximum(pos, -neg)
    violation = dphi_t + 0.5 * dual**2
    active = path.rho / grid.cell_volume > density_threshold
    if not active.any():
        return 0.0
    return float(np.maximum(violation[active], 0.0).max())
