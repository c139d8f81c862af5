"""Uniform-lattice discretization: fields, difference operators, solvers.

Layout
------
Scalars (densities, potentials) live on cell centers of a uniform grid with
spacing ``dx``; cells are indexed row-major as ``values[i0, i1, ...]``.
Fluxes live on interior cell faces, stored per axis: the axis-``v`` array has
shape ``(N_0, ..., N_v - 1, ..., N_{d-1})`` and entry ``[i]`` is the face
between cells ``i`` and ``i + e_v``.  Domain-boundary faces carry zero flux
and are not stored.

Units
-----
``DensityField.values`` are per-cell probability masses (they sum to 1) and
flux faces carry mass flux through the face, so ``div`` of a flux field has
mass-per-cell units and pairs directly with density differences.

The forward-difference gradient and the zero-flux divergence are exact
negative adjoints under the flat inner products, hence ``div(grad(.))`` is a
symmetric Neumann Laplacian.  Poisson solves invert it on the zero-mean
subspace, either by cosine-transform diagonalization (default, exact for this
stencil) or by conjugate gradients; both honor the same residual contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, cg

__all__ = [
    "GridSpec",
    "DensityField",
    "FluxField",
    "Potential",
    "grad",
    "div",
    "grad_arrays",
    "div_arrays",
    "laplacian_arrays",
    "solve_neumann_poisson",
    "solve_spacetime_poisson",
    "spacetime_laplacian_arrays",
    "time_derivative",
    "time_derivative_at",
    "time_derivative_matrix",
]

MASS_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular lattice of cells on an axis-aligned box.

    ``shape`` counts cells per axis, ``dx`` is the common spacing and
    ``origin`` the lower corner of the box; the box side along axis ``v`` is
    ``shape[v] * dx``.
    """

    shape: tuple[int, ...]
    dx: float
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if any(n < 2 for n in shape):
            raise ValueError(f"every axis needs at least 2 cells, got {shape}")
        if not self.dx > 0.0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        origin = tuple(float(c) for c in self.origin) or (0.0,) * len(shape)
        if len(origin) != len(shape):
            raise ValueError("origin length must match grid dimension")
        object.__setattr__(self, "origin", origin)

    @classmethod
    def unit_square(cls, n: int) -> "GridSpec":
        """n-by-n cells covering [0, 1]^2."""
        return cls(shape=(n, n), dx=1.0 / n)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.ndim

    def cell_centers(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.dx

    def cell_center(self, index: tuple[int, ...]) -> np.ndarray:
        if len(index) != self.ndim:
            raise ValueError("index length must match grid dimension")
        return np.array(
            [self.origin[v] + (index[v] + 0.5) * self.dx for v in range(self.ndim)]
        )

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] -= 1
        return tuple(s)


def _frozen_array(values, shape, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DensityField:
    """Nonnegative per-cell masses summing to one (a discrete probability)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, self.grid.shape, "density values")
        if np.any(arr < 0.0):
            raise ValueError("density values must be nonnegative")
        total = arr.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"density mass must be 1, got {total!r}")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class FluxField:
    """Mass flux through interior faces, one array per axis; boundary faces
    are identically zero by construction."""

    grid: GridSpec
    faces: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.faces) != self.grid.ndim:
            raise ValueError("one face array per axis is required")
        frozen = tuple(
            _frozen_array(f, self.grid.face_shape(v), f"axis-{v} faces")
            for v, f in enumerate(self.faces)
        )
        object.__setattr__(self, "faces", frozen)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FluxField":
        return cls(grid, tuple(np.zeros(grid.face_shape(v)) for v in range(grid.ndim)))

    def cell_vectors(self) -> np.ndarray:
        """Per-cell vector of outgoing (+side) face values, zero at the
        domain boundary; shape ``(*grid.shape, ndim)``."""
        return _cell_vectors(self.faces, self.grid.shape)


@dataclass(frozen=True)
class Potential:
    """Cell-centered dual potential, canonicalized to zero mean."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.shape:
            raise ValueError(f"potential must have shape {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("potential must be finite")
        arr -= arr.mean()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


# -- raw array operators ----------------------------------------------------


def grad_arrays(values: np.ndarray, dx: float) -> tuple[np.ndarray, ...]:
    """Forward differences onto interior faces, one array per axis."""
    values = np.asarray(values, dtype=float)
    return tuple(np.diff(values, axis=v) / dx for v in range(values.ndim))


def div_arrays(faces: tuple[np.ndarray, ...], dx: float, shape: tuple[int, ...]) -> np.ndarray:
    """Zero-flux divergence: per cell, (outgoing - incoming) faces over dx."""
    out = np.zeros(shape)
    for v, f in enumerate(faces):
        pad = [(0, 0)] * len(shape)
        pad[v] = (1, 1)
        out += np.diff(np.pad(f, pad), axis=v) / dx
    return out


def laplacian_arrays(values: np.ndarray, dx: float) -> np.ndarray:
    """``div(grad(values))`` with the operators above (Neumann)."""
    return div_arrays(grad_arrays(values, dx), dx, values.shape)


def _cell_vectors(faces: tuple[np.ndarray, ...], shape: tuple[int, ...]) -> np.ndarray:
    d = len(shape)
    out = np.zeros(shape + (d,))
    for v, f in enumerate(faces):
        sl = [slice(None)] * d
        sl[v] = slice(0, shape[v] - 1)
        out[tuple(sl) + (v,)] = f
    return out


# -- field-level operators ---------------------------------------------------


def grad(phi: Potential) -> FluxField:
    """Forward-difference gradient of a potential, face-centered."""
    return FluxField(phi.grid, grad_arrays(phi.values, phi.grid.dx))


def div(m: FluxField) -> np.ndarray:
    """Divergence of a flux field; sums to zero exactly (zero-flux walls)."""
    return div_arrays(m.faces, m.grid.dx, m.grid.shape)


# -- Poisson solves ----------------------------------------------------------


def _neumann_eigenvalues(shape: tuple[int, ...], spacings: tuple[float, ...]) -> np.ndarray:
    eig = np.zeros(shape)
    for v, (n, h) in enumerate(zip(shape, spacings)):
        lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)) / h**2
        eig = eig + lam.reshape([-1 if u == v else 1 for u in range(len(shape))])
    return eig


def _dct_poisson(rhs: np.ndarray, spacings: tuple[float, ...]) -> np.ndarray:
    r = rhs - rhs.mean()
    rhat = scipy.fft.dctn(r, type=2, norm="ortho")
    eig = _neumann_eigenvalues(rhs.shape, spacings)
    eig.flat[0] = 1.0  # constant mode is projected out
    rhat.flat[0] = 0.0
    phi = scipy.fft.idctn(rhat / eig, type=2, norm="ortho")
    return phi - phi.mean()


def _cg_poisson(rhs: np.ndarray, apply_minus_lap, maxiter: int = 20000) -> np.ndarray:
    r = rhs - rhs.mean()
    shape = r.shape
    size = r.size

    def matvec(x):
        phi = x.reshape(shape)
        # adding the mean keeps the operator SPD on the full space while
        # acting as -Laplacian on the zero-mean subspace
        return (apply_minus_lap(phi) + phi.mean()).ravel()

    op = LinearOperator((size, size), matvec=matvec)
    scale = np.abs(r).max()
    if scale == 0.0:
        return np.zeros(shape)
    x, info = cg(op, r.ravel(), rtol=1e-14, atol=1e-14 * scale, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    phi = x.reshape(shape)
    return phi - phi.mean()


def solve_neumann_poisson(rhs: np.ndarray, dx: float, method: str = "dct") -> np.ndarray:
    """Solve ``-div(grad(phi)) = rhs - mean(rhs)`` with zero-mean ``phi``.

    ``method`` is ``"dct"`` (cosine-transform diagonalization, exact for the
    stencil) or ``"cg"`` (matrix-free conjugate gradients).
    """
    rhs = np.asarray(rhs, dtype=float)
    spacings = (dx,) * rhs.ndim
    if method == "dct":
        return _dct_poisson(rhs, spacings)
    if method == "cg":
        return _cg_poisson(rhs, lambda p: -laplacian_arrays(p, dx))
    raise ValueError(f"unknown poisson method {method!r}")


def _time_second_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Neumann (reflecting) second difference along axis 0."""
    out = np.empty_like(values)
    out[1:-1] = values[2:] - 2.0 * values[1:-1] + values[:-2]
    out[0] = values[1] - values[0]
    out[-1] = values[-2] - values[-1]
    return out / dt**2


def spacetime_laplacian_arrays(values: np.ndarray, dx: float, dt: float) -> np.ndarray:
    """Discrete Laplacian over time (axis 0) and space (remaining axes)."""
    values = np.asarray(values, dtype=float)
    spatial = np.zeros_like(values)
    for v in range(1, values.ndim):
        f = np.diff(values, axis=v) / dx
        pad = [(0, 0)] * values.ndim
        pad[v] = (1, 1)
        spatial += np.diff(np.pad(f, pad), axis=v) / dx
    return _time_second_difference(values, dt) + spatial


def solve_spacetime_poisson(
    rhs: np.ndarray, dx: float, dt: float, method: str = "dct"
) -> np.ndarray:
    """Zero-mean solve of ``-(d_tt + lap) phi = rhs - mean`` with Neumann
    conditions in every axis including time (axis 0)."""
    rhs = np.asarray(rhs, dtype=float)
    spacings = (dt,) + (dx,) * (rhs.ndim - 1)
    if method == "dct":
        return _dct_poisson(rhs, spacings)
    if method == "cg":
        return _cg_poisson(rhs, lambda p: -spacetime_laplacian_arrays(p, dx, dt))
    raise ValueError(f"unknown poisson method {method!r}")


# -- time stencils ------------------------------------------------------------


def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Time derivative along axis 0: forward at the first slice, centered in
    the interior, backward at the last slice."""
    if values.shape[0] < 2:
        raise ValueError("need at least two time slices")
    out = np.empty_like(np.asarray(values, dtype=float))
    out[0] = (values[1] - values[0]) / dt
    if values.shape[0] > 2:
        out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    out[-1] = (values[-1] - values[-2]) / dt
    return out


def time_derivative_at(values: np.ndarray, dt: float, n: int, index: tuple[int, ...]) -> float:
    """Single-entry version of :func:`time_derivative` with bounds checking;
    ``n`` indexes the time slice (0-based)."""
    nt = values.shape[0]
    if not 0 <= n < nt:
        raise IndexError(f"time index {n} out of range [0, {nt})")
    cell = (slice(None),) + tuple(index)
    series = np.asarray(values, dtype=float)[cell]
    if n == 0:
        return float((series[1] - series[0]) / dt)
    if n == nt - 1:
        return float((series[-1] - series[-2]) / dt)
    return float((series[n + 1] - series[n - 1]) / (2.0 * dt))


def time_derivative_matrix(nt: int, dt: float) -> np.ndarray:
    """Dense ``(nt, nt)`` matrix of the three-branch time stencil (used for
    transposes in operator-norm estimates)."""
    mat = np.zeros((nt, nt))
    mat[0, 0], mat[0, 1] = -1.0 / dt, 1.0 / dt
    for n in range(1, nt - 1):
        mat[n, n - 1] = -1.0 / (2.0 * dt)
        mat[n, n + 1] = 1.0 / (2.0 * dt)
    mat[-1, -2], mat[-1, -1] = -1.0 / dt, 1.0 / dt
    return mat
