"""Polytope utilities for critical-region bookkeeping.

Everything here works on H-representations {x : E x <= f} with
L2-normalized rows, which keeps membership tests and redundancy checks
well scaled.
"""

from __future__ import annotations

import numpy as np

from mpbenders.lp import StandardLp, solve_lp

__all__ = [
    "normalize_rows",
    "dedupe_rows",
    "chebyshev_center",
    "drop_redundant_rows",
    "facet_center",
    "bounding_box",
]


def normalize_rows(E: np.ndarray, f: np.ndarray, zero_tol: float = 1e-12):
    """Unit-normalize rows; drops rows with a ~zero normal.

    A zero row with f >= 0 is vacuous; with f < 0 it marks an empty set,
    reported by returning None.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    norms = np.linalg.norm(E, axis=1)
    zero = norms <= zero_tol
    if np.any(f[zero] < -1e-9):
        return None
    keep = ~zero
    E, f, norms = E[keep], f[keep], norms[keep]
    return E / norms[:, None], f / norms


def dedupe_rows(E: np.ndarray, f: np.ndarray, tol: float = 1e-9):
    """Collapse near-identical directions, keeping the tightest offset."""
    keep: list[int] = []
    for i in range(E.shape[0]):
        dup = None
        for k in keep:
            if np.max(np.abs(E[i] - E[k])) <= tol:
                dup = k
                break
        if dup is None:
            keep.append(i)
        elif f[i] < f[dup]:
            keep[keep.index(dup)] = i
    keep.sort()
    return E[keep], f[keep]


def chebyshev_center(E: np.ndarray, f: np.ndarray):
    """Center and radius of the largest inscribed ball of {x : E x <= f}.

    Rows must be unit-normalized.  Returns (center, radius); radius < 0
    means the polytope is empty, and an unbounded polytope yields an
    unbounded ball (radius = inf is reported as None).
    """
    m, q = E.shape
    c = np.zeros(q + 1)
    c[-1] = -1.0  # maximize the ball radius
    A = np.hstack([E, np.ones((m, 1))])
    lb = np.full(q + 1, -np.inf)
    lb[-1] = 0.0
    sol = solve_lp(StandardLp(c=c, A_ub=A, b_ub=f, lb=lb))
    if sol.status == "unbounded":
        return None, None
    if not sol.is_optimal:
        return None, -np.inf
    return sol.x[:q].copy(), float(sol.x[q])


def drop_redundant_rows(E: np.ndarray, f: np.ndarray, tol: float = 1e-9):
    """Minimal H-representation: one LP per row.

    Row i is redundant when max E_i x subject to the other rows (with row
    i relaxed) stays below f_i.
    """
    m = E.shape[0]
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        f_rel = f.copy()
        f_rel[i] += 1.0
        mask = keep.copy()
        mask[i] = True
        sol = solve_lp(StandardLp(c=-E[i], A_ub=E[mask], b_ub=f_rel[mask]))
        if sol.is_optimal and -sol.objective <= f[i] + tol:
            keep[i] = False
    return E[keep], f[keep], np.flatnonzero(keep)


def facet_center(E: np.ndarray, f: np.ndarray, i: int):
    """Chebyshev center of facet i of {x : E x <= f} within its hyperplane.

    Rows must be unit-normalized.  Returns (point, radius); a radius near
    zero flags a degenerate (lower-dimensional) facet.
    """
    m, q = E.shape
    others = [k for k in range(m) if k != i]
    # project the other normals onto the facet hyperplane for a true
    # inscribed-ball radius inside the facet
    w = np.zeros(len(others))
    for r, k in enumerate(others):
        proj = E[k] - (E[k] @ E[i]) * E[i]
        w[r] = np.linalg.norm(proj)
    c = np.zeros(q + 1)
    c[-1] = -1.0
    A = np.hstack([E[others], w[:, None]])
    lb = np.full(q + 1, -np.inf)
    lb[-1] = 0.0
    sol = solve_lp(StandardLp(c=c, A_ub=A, b_ub=f[others],
                              A_eq=np.hstack([E[i][None, :], [[0.0]]]),
                              b_eq=[f[i]], lb=lb))
    if not sol.is_optimal:
        return None, -np.inf
    return sol.x[:q].copy(), float(sol.x[q])


def bounding_box(E: np.ndarray, f: np.ndarray):
    """Cheap valid box around {x : E x <= f} from single-coefficient rows.

    Used only as a prefilter; coordinates not pinned by an axis-aligned
    row stay infinite.
    """
    q = E.shape[1]
    lo = np.full(q, -np.inf)
    hi = np.full(q, np.inf)
    for i in range(E.shape[0]):
        nz = np.flatnonzero(np.abs(E[i]) > 1e-12)
        if nz.size != 1:
            continue
        j = nz[0]
        a = E[i, j]
        if a > 0:
            hi[j] = min(hi[j], f[i] / a)
        else:
            lo[j] = max(lo[j], f[i] / a)
    return lo, hi
