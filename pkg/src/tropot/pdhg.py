"""Shared machinery for the preconditioned primal-dual solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SolverConfig",
    "ConvergenceReport",
    "InfeasibleProblemError",
    "estimate_opnorm_sq",
]


class InfeasibleProblemError(ValueError):
    """Raised when endpoint masses are incompatible with the constraint."""


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the primal-dual iterations.

    ``None`` entries fall back to per-solver defaults; explicit ``h``/``tau``
    override the automatic choice derived from the preconditioned operator
    norm (use with care: the iterations are only guaranteed to converge when
    ``sqrt(h * tau)`` times that norm stays below one).
    """

    h: float | None = None
    tau: float | None = None
    eps: float | None = None
    max_iter: int | None = None
    n_t: int | None = None
    feas_tol: float | None = None
    seed: int = 0
    poisson_method: str = "dct"
    step_safety: float = 0.9

    def __post_init__(self):
        for name in ("h", "tau", "eps", "feas_tol"):
            val = getattr(self, name)
            if val is not None and not val > 0.0:
                raise ValueError(f"{name} must be positive if given")
        if self.n_t is not None and self.n_t < 2:
            raise ValueError("n_t must be at least 2")
        if not 0.0 < self.step_safety < 1.0:
            raise ValueError("step_safety must lie in (0, 1)")


@dataclass
class ConvergenceReport:
    """Per-iteration history and the final state of a solver run."""

    converged: bool
    iterations: int
    objective: np.ndarray
    relative_error: np.ndarray
    feasibility: np.ndarray
    final_residual: float
    h: float
    tau: float
    opnorm_sq: float
    eps: float
    feas_tol: float = field(default=float("nan"))

    def history_rows(self):
        for it in range(self.iterations):
            yield (it + 1, self.objective[it], self.relative_error[it],
                   self.feasibility[it])

    def write_history_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("iter,objective,relative_error,feasibility\n")
            for it, obj, rel, feas in self.history_rows():
                fh.write(f"{it},{obj:.17g},{rel:.17g},{feas:.17g}\n")


def estimate_opnorm_sq(apply_kkt, apply_inverse, minus_laplacian, shape,
                       seed: int = 0, iterations: int = 60) -> float:
    """Squared norm of the preconditioned constraint operator by power
    iteration.

    Estimates the largest generalized eigenvalue of ``K K^T w = lam (-L) w``
    where ``apply_kkt`` applies ``K K^T`` on cell fields, ``apply_inverse``
    applies ``(-L)^{-1}`` and ``minus_laplacian`` applies ``-L``; this equals
    ``norm((-L)^{-1/2} K)^2``.
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(shape)
    w -= w.mean()
    w /= np.linalg.norm(w.ravel())
    lam = 1.0
    for _ in range(iterations):
        kw = apply_kkt(w)
        num = float((w * kw).sum())
        den = float((w * minus_laplacian(w)).sum())
        if den <= 0.0:
            break
        lam = num / den
        w = apply_inverse(kw)
        w -= w.mean()
        norm = np.linalg.norm(w.ravel())
        if norm == 0.0:
            break
        w /= norm
    return lam


def relative_change(value: float, previous: float | None) -> float:
    """|value - previous| / |previous| with the 0/0 case mapped to zero."""
    if previous is None:
        return float("inf")
    if previous == 0.0:
        return 0.0 if value == 0.0 else float("inf")
    return abs(value - previous) / abs(previous)
