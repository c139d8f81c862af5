"""Closed-form proximal operators used by the primal-dual solvers.

* ``tropical_shrink`` -- prox of the tropical norm (any dimension), via
  sorted thresholds on the positive and negative parts.
* ``kinetic_flux_prox`` -- minimizer of ``mu/2 * trop_norm(m)**2
  + 1/2 * |m - c|^2`` for 2-vectors, the flux update of the dynamic solver.
* ``largest_nonneg_root`` -- largest real root ``>= 0`` of a cubic, used by
  the density update.
* ``trop_norm_2d_cases`` -- independent 6-branch evaluation of the 2-D
  tropical norm, kept separate from :mod:`tropot.core` for cross-validation.

All operators accept batches: the vector-valued ones take ``(..., n)`` arrays
and the scalar ones broadcast elementwise.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "tropical_shrink",
    "kinetic_flux_prox",
    "largest_nonneg_root",
    "trop_norm_2d_cases",
]


def _sorted_threshold(s: np.ndarray, count: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Threshold level and number of clamped slots for one sign side.

    ``s`` holds rows sorted in descending order whose first ``count`` entries
    are the relevant (nonnegative) part; an implicit 0 sentinel follows them.
    Returns ``(t, l)`` with ``t`` the clamp level and ``l`` how many leading
    sorted slots are clamped to it.
    """
    m, n = s.shape
    cols = np.arange(n)[None, :]
    u = np.where(cols < count[:, None], s, 0.0)
    pref = np.cumsum(u, axis=1)
    j = cols + 1
    # sum_{i<=j} (u_i - u_j) < 1, evaluated for j = 1..n; j is capped at
    # count+1 (the sentinel slot).  The feasible j form a prefix.
    ok = (pref - j * u < 1.0) & (j <= count[:, None] + 1)
    j_best = np.where(ok, j, 0).max(axis=1)
    # sentinel lives at column n+1 only when count == n
    sentinel = (count == n) & (pref[:, -1] < 1.0)
    j_best = np.where(sentinel, n + 1, j_best)

    idx = np.clip(j_best - 1, 0, n - 1)
    pref_at = np.take_along_axis(pref, idx[:, None], axis=1)[:, 0]
    active = (j_best >= 1) & (j_best <= count)
    t = np.where(active, (pref_at - 1.0) / np.maximum(j_best, 1), 0.0)
    levels = np.minimum(j_best, count)
    return t, levels


def _shrink_2d(flat: np.ndarray, h: float) -> np.ndarray:
    """Closed-form 2-D tropical shrink (order + sign case analysis).

    Reduces every pair to the sorted case ``b1 >= b2`` with ``b1 >= 0`` by a
    swap and, for all-negative pairs, the antisymmetry
    ``shrink(-b) = -shrink(b)`` of the objective.
    """
    b0 = flat[:, 0]
    b1 = flat[:, 1]
    swap = b0 < b1
    s1 = np.where(swap, b1, b0)
    s2 = np.where(swap, b0, b1)
    negflip = s1 < 0.0
    t1 = np.where(negflip, -s2, s1)
    t2 = np.where(negflip, -s1, s2)

    # both components nonnegative: clamp against the sorted thresholds
    gap_hit = t1 - t2 >= 1.0
    tot = t1 + t2
    pair_level = h * (tot - 1.0) / 2.0
    xa1 = np.where(gap_hit, h * (t1 - 1.0), np.where(tot >= 1.0, pair_level, 0.0))
    xa2 = np.where(gap_hit, h * t2, np.where(tot >= 1.0, pair_level, 0.0))
    # mixed signs: each side soft-thresholds independently
    xb1 = h * np.maximum(t1 - 1.0, 0.0)
    xb2 = h * np.minimum(t2 + 1.0, 0.0)

    pos = t2 >= 0.0
    y1 = np.where(pos, xa1, xb1)
    y2 = np.where(pos, xa2, xb2)
    z1 = np.where(negflip, -y2, y1)
    z2 = np.where(negflip, -y1, y2)
    out = np.empty_like(flat)
    out[:, 0] = np.where(swap, z2, z1)
    out[:, 1] = np.where(swap, z1, z2)
    return out


def tropical_shrink(b, h: float) -> np.ndarray:
    """Prox of the tropical norm: argmin ``|a|^2/(2h) + trop_norm(a) - b.a``.

    Accepts ``(..., n)`` batches; ``h`` must be positive.  Sorting is stable,
    so ties in ``b`` are resolved deterministically and the operator commutes
    with coordinate permutations.
    """
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h}")
    arr = np.asarray(b, dtype=float)
    if arr.ndim == 0:
        raise ValueError("b must be a vector or a batch of vectors")
    if not np.all(np.isfinite(arr)):
        raise ValueError("b must have finite entries")
    shape = arr.shape
    n = shape[-1]
    flat = arr.reshape(-1, n)
    if n == 2:
        return _shrink_2d(flat, h).reshape(shape)
    return _shrink_general(flat, h).reshape(shape)


def _shrink_general(flat: np.ndarray, h: float) -> np.ndarray:
    """Sorted-threshold tropical shrink for any dimension."""
    n = flat.shape[1]
    order = np.argsort(-flat, axis=1, kind="stable")
    s = np.take_along_axis(flat, order, axis=1)
    k = (s >= 0.0).sum(axis=1)

    t1, l1 = _sorted_threshold(s, k)
    t2, l2 = _sorted_threshold(-s[:, ::-1], n - k)

    cols = np.arange(n)[None, :]
    x_sorted = np.where(
        cols < l1[:, None],
        (h * t1)[:, None],
        np.where(cols >= (n - l2)[:, None], (-h * t2)[:, None], h * s),
    )
    out = np.empty_like(flat)
    np.put_along_axis(out, order, x_sorted, axis=1)
    return out


def kinetic_flux_prox(c, mu) -> np.ndarray:
    """Minimizer of ``mu/2 * trop_norm(m)**2 + 1/2 * |m - c|^2`` in 2-D.

    ``c`` has shape ``(..., 2)`` and ``mu`` (positive) broadcasts against the
    leading axes.  Branch boundaries are resolved first-match-wins with
    non-strict comparisons; the minimizer is continuous across them, so the
    choice does not affect values.
    """
    carr = np.asarray(c, dtype=float)
    if carr.shape[-1] != 2:
        raise ValueError(f"c must have 2 components, got shape {carr.shape}")
    mu_arr = np.asarray(mu, dtype=float)
    if not np.all(mu_arr > 0.0):
        raise ValueError("mu must be positive")
    c1 = carr[..., 0]
    c2 = carr[..., 1]
    a = 1.0 + mu_arr
    c1, c2, a, mu_b = np.broadcast_arrays(c1, c2, a, mu_arr)

    slo = -mu_b / a * c1  # boundary against a zero second component
    shi = -a / mu_b * c1  # boundary against a zero first component

    conds = [
        ((c2 >= a * c1) & (a * c1 >= 0.0)) | ((c2 <= a * c1) & (a * c1 <= 0.0)),
        ((c1 >= a * c2) & (a * c2 >= 0.0)) | ((c1 <= a * c2) & (a * c2 <= 0.0)),
        ((slo >= c2) & (c2 >= shi)) | ((slo <= c2) & (c2 <= shi)),
        ((slo >= c2) & (c2 >= 0.0)) | ((slo <= c2) & (c2 <= 0.0)),
        ((c2 >= shi) & (shi >= 0.0)) | ((c2 <= shi) & (shi <= 0.0)),
        ((a * c1 >= c2) & (c2 >= c1 / a)) | ((a * c1 <= c2) & (c2 <= c1 / a)),
    ]
    opposed = ((a * c1 + mu_b * c2) / (1.0 + 2.0 * mu_b),
               (a * c2 + mu_b * c1) / (1.0 + 2.0 * mu_b))
    equal = (c1 + c2) / (2.0 + mu_b)
    vals1 = [c1, c1 / a, opposed[0], c1 / a, np.zeros_like(c1), equal]
    vals2 = [c2 / a, c2, opposed[1], np.zeros_like(c2), c2 / a, equal]

    m1 = np.select(conds, vals1, default=np.nan)
    m2 = np.select(conds, vals2, default=np.nan)
    return np.stack([m1, m2], axis=-1)


def _cubic_largest_real_root(a2, a1, a0):
    """Largest real root of ``x^3 + a2 x^2 + a1 x + a0``, elementwise."""
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3

    with np.errstate(invalid="ignore", divide="ignore"):
        # one real root: take the larger-magnitude cube root first to avoid
        # cancellation, recover the partner from p
        sq = np.sqrt(np.maximum(disc, 0.0))
        big = -q / 2.0 - np.sign(q) * sq
        u = np.cbrt(big)
        partner = np.where(u != 0.0, -p / (3.0 * np.where(u != 0.0, u, 1.0)), 0.0)
        t_single = u + partner

        # three real roots: trigonometric form, k = 0 gives the largest
        r = np.sqrt(np.maximum(-p, 0.0) / 3.0)
        r_safe = np.where(r > 0.0, r, 1.0)
        cosarg = np.clip(-q / (2.0 * r_safe**3), -1.0, 1.0)
        t_triple = 2.0 * r * np.cos(np.arccos(cosarg) / 3.0)

    t = np.where(disc > 0.0, t_single, t_triple)
    x = t - a2 / 3.0

    # polish: two guarded Newton steps tighten the closed form to full
    # precision away from multiple roots (where the closed form is already
    # adequate because the residual is cubic in the root error)
    for _ in range(2):
        f = ((x + a2) * x + a1) * x + a0
        df = (3.0 * x + 2.0 * a2) * x + a1
        step = np.where(np.abs(df) > 1e-30, f / np.where(df != 0.0, df, 1.0), 0.0)
        x = x - step
    return x


def largest_nonneg_root(a2, a1, a0) -> float | np.ndarray:
    """Largest real root ``>= 0`` of ``x^3 + a2 x^2 + a1 x + a0``.

    Broadcasts elementwise.  Raises when some entry has no nonnegative real
    root.  Roundoff at an exact zero root is clamped.
    """
    a2a, a1a, a0a = np.broadcast_arrays(
        np.asarray(a2, dtype=float), np.asarray(a1, dtype=float), np.asarray(a0, dtype=float)
    )
    x = _cubic_largest_real_root(a2a, a1a, a0a)
    tol = 1e-9 * np.maximum(1.0, np.abs(x))
    if np.any(x < -tol):
        raise ValueError("cubic has no nonnegative real root")
    x = np.maximum(x, 0.0)
    return float(x) if x.ndim == 0 else x


def trop_norm_2d_cases(m) -> float | np.ndarray:
    """2-D tropical norm by explicit sign/order case analysis.

    Independent of :func:`tropot.core.trop_norm`; the two must agree exactly.
    ``m`` has shape ``(..., 2)``.
    """
    arr = np.asarray(m, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError(f"m must have 2 components, got shape {arr.shape}")
    m1 = arr[..., 0]
    m2 = arr[..., 1]
    conds = [
        (m1 >= m2) & (m2 >= 0.0),
        (m2 >= m1) & (m1 >= 0.0),
        (0.0 >= m2) & (m2 >= m1),
        (0.0 >= m1) & (m1 >= m2),
        (m1 >= 0.0) & (0.0 >= m2),
        (m2 >= 0.0) & (0.0 >= m1),
    ]
    vals = [m1, m2, -m1, -m2, m1 - m2, m2 - m1]
    out = np.select(conds, vals, default=np.nan)
    return float(out) if out.ndim == 0 else out
