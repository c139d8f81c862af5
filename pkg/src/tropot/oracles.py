"""Independent brute-force references used by tests and acceptance runs.

Self-contained on purpose: the linear program is solved with a hand-rolled
transportation (network) simplex so the reference is auditable end to end,
the proximal minimizers come from dense grid scans with zoom refinement, and
the dual norm is checked by literal subset enumeration.  Nothing here shares
code paths with the solvers it validates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import trop_dist, trop_norm

__all__ = [
    "DiscreteTransportInstance",
    "lp_wasserstein",
    "brute_force_minimize",
    "shrink_objective",
    "kinetic_objective",
    "trop_dual_norm_enum",
]

MAX_SUPPORT = 400
MAX_ENUM_DIM = 20


@dataclass(frozen=True)
class DiscreteTransportInstance:
    """Finite transport problem between weighted point sets.

    ``source_points``/``sink_points`` are ``(S, n)`` and ``(T, n)`` arrays,
    masses are nonnegative and each side sums to one.  ``distances`` holds
    the tropical ground distances ``d(source_i, sink_j)``.
    """

    source_points: np.ndarray
    source_masses: np.ndarray
    sink_points: np.ndarray
    sink_masses: np.ndarray

    def __post_init__(self):
        sp = np.atleast_2d(np.asarray(self.source_points, dtype=float))
        tp = np.atleast_2d(np.asarray(self.sink_points, dtype=float))
        sm = np.asarray(self.source_masses, dtype=float)
        tm = np.asarray(self.sink_masses, dtype=float)
        if sp.shape[0] != sm.shape[0] or tp.shape[0] != tm.shape[0]:
            raise ValueError("points and masses must have matching lengths")
        if sp.shape[0] > MAX_SUPPORT or tp.shape[0] > MAX_SUPPORT:
            raise ValueError(f"support sizes must be <= {MAX_SUPPORT}")
        if np.any(sm < 0.0) or np.any(tm < 0.0):
            raise ValueError("masses must be nonnegative")
        if abs(sm.sum() - 1.0) > 1e-9 or abs(tm.sum() - 1.0) > 1e-9:
            raise ValueError("each side must carry total mass 1")
        for name, arr in (("source_points", sp), ("source_masses", sm),
                          ("sink_points", tp), ("sink_masses", tm)):
            a = arr.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def distances(self) -> np.ndarray:
        return trop_dist(self.source_points[:, None, :], self.sink_points[None, :, :])


def _northwest_corner(a: np.ndarray, b: np.ndarray):
    """Initial basic feasible plan plus its basis cells."""
    s_count, t_count = len(a), len(b)
    plan = np.zeros((s_count, t_count))
    basis: list[tuple[int, int]] = []
    a_res = a.copy()
    b_res = b.copy()
    i = j = 0
    while len(basis) < s_count + t_count - 1:
        basis.append((i, j))
        move = min(a_res[i], b_res[j])
        plan[i, j] = move
        a_res[i] -= move
        b_res[j] -= move
        if i == s_count - 1 and j == t_count - 1:
            break
        # advance along the exhausted side; prefer rows on ties but never
        # step outside the table
        if (a_res[i] <= b_res[j] and i < s_count - 1) or j == t_count - 1:
            i += 1
        else:
            j += 1
    return plan, basis


def _tree_adjacency(basis, s_count, t_count):
    rows: list[list[int]] = [[] for _ in range(s_count)]
    cols: list[list[int]] = [[] for _ in range(t_count)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    return rows, cols


def _duals(cost, basis, s_count, t_count):
    rows, cols = _tree_adjacency(basis, s_count, t_count)
    u = np.full(s_count, np.nan)
    v = np.full(t_count, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("r", i))
    if np.isnan(u).any() or np.isnan(v).any():
        raise RuntimeError("basis is not a spanning tree")
    return u, v


def _cycle(basis, enter, s_count, t_count):
    """Alternating cycle created by the entering cell, as signed cells."""
    rows, cols = _tree_adjacency(basis, s_count, t_count)
    ie, je = enter
    # path from row ie to col je through the basis tree
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    start, goal = ("r", ie), ("c", je)
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            break
        kind, k = node
        nbrs = (("c", j) for j in rows[k]) if kind == "r" else (("r", i) for i in cols[k])
        for nxt in nbrs:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                stack.append(nxt)
    else:
        raise RuntimeError("entering cell closes no cycle")

    path = [goal]
    while path[-1] != start:
        path.append(parent[path[-1]])
    minus, plus = [], []
    sign_minus = True  # the path edge touching the entering column is a minus
    for anode, bnode in zip(path, path[1:]):
        (ka, va), (kb, vb) = anode, bnode
        cell = (vb, va) if ka == "c" else (va, vb)
        (minus if sign_minus else plus).append(cell)
        sign_minus = not sign_minus
    return plus, minus


def _rebuild_plan(basis, a, b, s_count, t_count):
    """Exact basic values from the final tree by leaf elimination."""
    rows, cols = _tree_adjacency(basis, s_count, t_count)
    deg = {("r", i): len(rows[i]) for i in range(s_count)}
    deg.update({("c", j): len(cols[j]) for j in range(t_count)})
    rest_a = a.copy()
    rest_b = b.copy()
    cell_of = {}
    for i, j in basis:
        cell_of.setdefault(("r", i), []).append((i, j))
        cell_of.setdefault(("c", j), []).append((i, j))
    alive = set(basis)
    plan = np.zeros((s_count, t_count))
    leaves = [node for node, d in deg.items() if d == 1]
    while leaves:
        node = leaves.pop()
        live = [c for c in cell_of.get(node, []) if c in alive]
        if not live:
            continue
        i, j = live[0]
        amount = rest_a[i] if node[0] == "r" else rest_b[j]
        plan[i, j] = amount
        rest_a[i] -= amount
        rest_b[j] -= amount
        alive.discard((i, j))
        for other in (("c", j), ("r", i)):
            if other != node:
                deg[other] -= 1
                if deg[other] == 1:
                    leaves.append(other)
    if alive:
        raise RuntimeError("basis tree elimination left cells unresolved")
    return plan


def lp_wasserstein(instance: DiscreteTransportInstance, p: float = 1.0):
    """Exact Kantorovich value and plan by transportation simplex.

    Returns ``(value, plan)`` where ``value = (sum c_ij plan_ij)**(1/p)`` with
    ``c = trop_dist**p``; optimality is certified by a duality gap below
    ``1e-9`` relative to the cost scale.
    """
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    a = instance.source_masses.copy()
    b = instance.sink_masses.copy()
    b *= a.sum() / b.sum()  # equalize the tiny normalization residue
    cost = instance.distances ** p
    s_count, t_count = cost.shape

    plan, basis = _northwest_corner(a, b)
    basis_set = set(basis)
    scale = max(1.0, float(np.abs(cost).max()))
    max_pivots = 60 * (s_count + t_count) + 2 * s_count * t_count
    bland = False  # most-negative rule first; Bland's rule on budget overrun
    pivots = 0
    while True:
        u, v = _duals(cost, basis, s_count, t_count)
        reduced = cost - u[:, None] - v[None, :]
        if bland:
            cand = np.argwhere(reduced < -1e-11 * scale)
            if len(cand) == 0:
                break
            enter = (int(cand[0][0]), int(cand[0][1]))
        else:
            flat = np.unravel_index(int(np.argmin(reduced)), reduced.shape)
            enter = (int(flat[0]), int(flat[1]))
            if reduced[enter] >= -1e-11 * scale:
                break
        plus, minus = _cycle(basis, enter, s_count, t_count)
        theta_idx = min(range(len(minus)), key=lambda k: (plan[minus[k]], minus[k]))
        theta = plan[minus[theta_idx]]
        plan[enter] += theta
        for cell in plus:
            plan[cell] += theta
        for cell in minus:
            plan[cell] -= theta
        leave = minus[theta_idx]
        plan[leave] = 0.0
        basis_set.discard(leave)
        basis_set.add(enter)
        basis = list(basis_set)
        pivots += 1
        if pivots > max_pivots:
            if bland:
                raise RuntimeError("transportation simplex exceeded its pivot budget")
            bland = True
            pivots = 0

    plan = _rebuild_plan(basis, a, b, s_count, t_count)
    if np.any(plan < -1e-9):
        raise RuntimeError("simplex produced a negative basic value")
    plan = np.maximum(plan, 0.0)

    primal = float((cost * plan).sum())
    dual = float(a @ u + b @ v)
    if abs(primal - dual) > 1e-9 * scale:
        raise RuntimeError(f"duality gap {abs(primal - dual)} exceeds certificate")
    return primal ** (1.0 / p), plan


# -- numerical prox references -------------------------------------------------


def brute_force_minimize(objective, box, coarse: int = 201, fine: int = 41,
                         width_tol: float = 1e-6):
    """Global grid scan plus zoom refinement over an axis-aligned box.

    ``objective`` must accept ``(..., d)`` arrays and return ``(...,)``
    values.  Scans ``coarse`` points per axis, then repeatedly re-grids a
    box shrunk around the incumbent until every side is below ``width_tol``.
    Returns ``(point, value)``.
    """
    lo = np.array([float(b[0]) for b in box])
    hi = np.array([float(b[1]) for b in box])
    d = len(box)

    def scan(lo_, hi_, pts):
        axes = [np.linspace(lo_[k], hi_[k], pts) for k in range(d)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = objective(mesh)
        flat = int(np.argmin(vals))
        idx = np.unravel_index(flat, vals.shape)
        return mesh[idx], float(vals[idx])

    best, val = scan(lo, hi, coarse)
    width = hi - lo
    while width.max() > width_tol:
        width = width / 8.0
        lo = np.maximum(best - width / 2.0, lo)
        hi = lo + width
        best, val = scan(lo, hi, fine)
    return best, val


def shrink_objective(b, h: float):
    """Objective whose argmin is ``tropical_shrink(b, h)``."""
    b = np.asarray(b, dtype=float)

    def obj(a):
        return (a**2).sum(axis=-1) / (2.0 * h) + trop_norm(a) - (a * b).sum(axis=-1)

    return obj


def kinetic_objective(c, mu: float):
    """Objective whose argmin is ``kinetic_flux_prox(c, mu)``."""
    c = np.asarray(c, dtype=float)

    def obj(m):
        return mu * np.asarray(trop_norm(m)) ** 2 + ((m - c) ** 2).sum(axis=-1)

    return obj


# -- subset enumeration --------------------------------------------------------


def trop_dual_norm_enum(b):
    """Exact ``max_S |sum_{i in S} b_i|`` by enumerating all subsets.

    Returns ``(value, subset)`` with a frozenset of 0-based indices; the
    empty set (value 0) is returned for the zero vector.  Limited to
    ``n <= 20`` components.
    """
    arr = np.asarray(b, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expects a single vector")
    n = arr.shape[0]
    if n > MAX_ENUM_DIM:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUM_DIM}, got {n}")
    best_val = 0.0
    best_mask = 0
    chunk = 1 << 16
    bits = np.arange(n)
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n))
        member = (masks[:, None] >> bits[None, :]) & 1
        sums = np.abs(member @ arr)
        k = int(np.argmax(sums))
        if sums[k] > best_val:
            best_val = float(sums[k])
            best_mask = int(masks[k])
    subset = frozenset(i for i in range(n) if (best_mask >> i) & 1)
    return best_val, subset
