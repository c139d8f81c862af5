"""Exact max-plus (tropical) metric primitives on the projective torus.

Points of the quotient ``R^(n+1) / R*(1,...,1)`` are represented by their
image in ``R^n`` (subtract the last coordinate).  All functions below work on
that representation.  ``trop_dist``, ``trop_norm`` and ``trop_dual_norm``
broadcast over leading axes and reduce over the last axis; the support and
maximizer helpers operate on a single vector.

Conventions
-----------
* Indices in support sets are 0-based.
* When the positive and negative subset sums tie, the positive index set is
  chosen (deterministic).
* Entries equal to zero never belong to a support set.
* ``hamiltonian`` returns ``math.inf`` for the unbounded cases rather than
  overflowing.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "trop_dist",
    "trop_norm",
    "trop_dual_norm",
    "trop_dual_support",
    "hamiltonian",
    "hamiltonian_argmax",
]


def _as_vectors(a, name: str = "input") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        raise ValueError(f"{name} must be a vector, got a scalar")
    if arr.shape[-1] < 1:
        raise ValueError(f"{name} must have at least one component")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    return arr


def _maybe_scalar(x: np.ndarray) -> float | np.ndarray:
    return float(x) if x.ndim == 0 else x


def trop_norm(a) -> float | np.ndarray:
    """Tropical norm ``max(max_i a_i, 0) - min(min_i a_i, 0)``.

    Reduces over the last axis; leading axes broadcast.  Nonnegative,
    positively 1-homogeneous and zero exactly at the zero vector.
    """
    arr = _as_vectors(a, "a")
    hi = np.maximum(arr.max(axis=-1), 0.0)
    lo = np.minimum(arr.min(axis=-1), 0.0)
    return _maybe_scalar(hi - lo)


def trop_dist(x, y) -> float | np.ndarray:
    """Tropical metric between points given by their R^n representatives.

    ``max( max_{i<j} |(x_i-y_i) - (x_j-y_j)|, max_i |x_i-y_i| )`` which is the
    max-minus-min of the coordinatewise differences taken in R^(n+1).
    """
    xa = _as_vectors(x, "x")
    ya = _as_vectors(y, "y")
    if xa.shape[-1] != ya.shape[-1]:
        raise ValueError(
            f"dimension mismatch: x has n={xa.shape[-1]}, y has n={ya.shape[-1]}"
        )
    d = xa - ya
    gaps = np.abs(d[..., :, None] - d[..., None, :]).max(axis=(-2, -1))
    return _maybe_scalar(np.maximum(gaps, np.abs(d).max(axis=-1)))


def trop_dual_norm(b) -> float | np.ndarray:
    """Dual norm of ``trop_norm``: the largest absolute subset sum of ``b``.

    Equals ``max(sum of positive entries, -(sum of negative entries))`` and is
    zero exactly at the zero vector.  Reduces over the last axis.
    """
    arr = _as_vectors(b, "b")
    pos = np.where(arr > 0.0, arr, 0.0).sum(axis=-1)
    neg = np.where(arr < 0.0, arr, 0.0).sum(axis=-1)
    return _maybe_scalar(np.maximum(pos, -neg))


def trop_dual_support(b) -> frozenset[int]:
    """Index set achieving ``trop_dual_norm(b)`` for a single vector ``b``.

    Returns all strictly positive indices when the positive sum is at least
    the magnitude of the negative sum (ties included), otherwise all strictly
    negative indices.  Raises for the zero vector, which has no support.
    """
    arr = _as_vectors(b, "b")
    if arr.ndim != 1:
        raise ValueError("trop_dual_support expects a single vector")
    pos = arr[arr > 0.0].sum()
    neg = -arr[arr < 0.0].sum()
    if pos == 0.0 and neg == 0.0:
        raise ValueError("zero vector is degenerate: no achieving subset")
    if pos >= neg:
        return frozenset(np.nonzero(arr > 0.0)[0].tolist())
    return frozenset(np.nonzero(arr < 0.0)[0].tolist())


def hamiltonian(b, p: float) -> float:
    """Value of ``sup_a { a.b - trop_norm(a)**p / p }`` for a single vector.

    Piecewise in ``p`` and ``z = trop_dual_norm(b)``:

    * ``0`` when ``b = 0``, or when ``p = 1`` and ``z <= 1``;
    * ``inf`` when ``p < 1`` and ``b != 0``, or when ``p = 1`` and ``z > 1``;
    * ``(p-1)/p * z**(p/(p-1))`` when ``p > 1`` and ``b != 0``.
    """
    arr = _as_vectors(b, "b")
    if arr.ndim != 1:
        raise ValueError("hamiltonian expects a single vector")
    z = float(trop_dual_norm(arr))
    if z == 0.0:
        return 0.0
    if p < 1.0:
        return math.inf
    if p == 1.0:
        return 0.0 if z <= 1.0 else math.inf
    return (p - 1.0) / p * z ** (p / (p - 1.0))


def hamiltonian_argmax(b, p: float) -> np.ndarray:
    """A maximizer of ``a.b - trop_norm(a)**p / p`` for ``p > 1``.

    Supported on ``trop_dual_support(b)`` with every nonzero entry of
    magnitude ``trop_dual_norm(b)**(1/(p-1))`` and the sign of the matching
    entry of ``b``.  Returns the zero vector for ``b = 0`` (the unique
    maximizer there).
    """
    if p <= 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    arr = _as_vectors(b, "b")
    if arr.ndim != 1:
        raise ValueError("hamiltonian_argmax expects a single vector")
    out = np.zeros_like(arr)
    z = float(trop_dual_norm(arr))
    if z == 0.0:
        return out
    support = sorted(trop_dual_support(arr))
    out[support] = np.sign(arr[support]) * z ** (1.0 / (p - 1.0))
    return out
