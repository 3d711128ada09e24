"""Explicit solution of multi-parametric LPs.

A parametric program

    z(theta) = min_x (c + H theta)' x
        s.t.  A x <= b + F theta
              A_eq x = b_eq + F_eq theta
              theta in Theta = {A_theta theta <= b_theta}

is solved once into a set of critical regions.  Inside region v the
optimizer is affine, x*(theta) = A_aff theta + b_aff, the active-set
duals are affine, lambda(theta) = G theta + g, and the optimal value is
(c + H theta)' x*(theta) -- quadratic in theta in general and affine
whenever the cost slots of theta are frozen.

Region construction works from the optimal simplex basis at a seed
point: the rows whose slacks are nonbasic form, together with the
equality rows, a square invertible active-set system.  The region
polytope collects primal feasibility of the inactive rows, dual
nonnegativity and the Theta bounds, then gets unit-normalized, reduced
to a minimal representation, and certified by its Chebyshev ball.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from mpbenders.geometry import (
    bounding_box,
    chebyshev_center,
    dedupe_rows,
    drop_redundant_rows,
    facet_center,
    normalize_rows,
)
from mpbenders.lp import (
    DimensionMismatch,
    NumericalFailure,
    SolverError,
    StandardLp,
    solve_lp,
)
from mpbenders.subproblem import ScenarioSubproblemSpec

__all__ = [
    "MpLp",
    "CriticalRegion",
    "MpSolution",
    "ThetaLayout",
    "EmptySolution",
    "NoRegionFound",
    "RankDeficientActiveSet",
    "FormatError",
    "embed_subproblem",
    "enumerate_regions",
    "locate_region",
    "evaluate_primal",
    "evaluate_value",
    "evaluate_duals",
    "subgradient_wrt_master",
    "save_mp",
    "load_mp",
]

FORMAT_VERSION = 1

MEMBER_TOL = 1e-8       # locate_region membership slack
RADIUS_MIN = 1e-8       # full-dimensionality threshold
FACET_STEP = 1e-6       # step past a facet midpoint when exploring
_RANK_TOL = 1e-9


class EmptySolution(SolverError):
    """The parametric LP is infeasible for every theta in Theta."""


class NoRegionFound(SolverError):
    """A query point lies in no stored region."""


class RankDeficientActiveSet(SolverError):
    """No invertible active-set system could be recovered at a seed."""


class FormatError(Exception):
    """Malformed mp-solution document; carries the offending path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class ThetaLayout:
    """Which theta slots hold master values, cost values and rhs values."""

    master_idx: tuple[int, ...]
    cost_idx: tuple[int, ...]
    rhs_idx: tuple[int, ...]

    def __post_init__(self):
        allidx = sorted(self.master_idx) + sorted(self.cost_idx) + sorted(self.rhs_idx)
        combined = sorted(allidx)
        if combined != list(range(len(combined))):
            raise DimensionMismatch("layout blocks must partition the theta slots")

    @property
    def theta_dim(self) -> int:
        return len(self.master_idx) + len(self.cost_idx) + len(self.rhs_idx)

    def assemble(self, master: np.ndarray, cost: np.ndarray,
                 rhs: np.ndarray) -> np.ndarray:
        theta = np.empty(self.theta_dim)
        theta[list(self.master_idx)] = master
        theta[list(self.cost_idx)] = cost
        theta[list(self.rhs_idx)] = rhs
        return theta


@dataclass(frozen=True)
class MpLp:
    """Parametric LP data; see the module docstring for the formulation."""

    c: np.ndarray
    H: np.ndarray
    A: np.ndarray
    b: np.ndarray
    F: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    F_eq: np.ndarray
    A_theta: np.ndarray
    b_theta: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        q = H.shape[1]
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "H", H)

        def pair(M, v, rows_name, cols):
            M = np.asarray(M, dtype=float).reshape(-1, cols)
            v = np.atleast_1d(np.asarray(v, dtype=float)) if np.size(v) else np.zeros(0)
            if M.shape[0] != v.size:
                raise DimensionMismatch(f"{rows_name}: {M.shape[0]} rows vs {v.size} rhs")
            return M, v

        A, b = pair(self.A, self.b, "A/b", n)
        F = np.asarray(self.F, dtype=float).reshape(-1, q)
        if F.shape[0] != A.shape[0]:
            raise DimensionMismatch("F must have one row per inequality")
        A_eq, b_eq = pair(self.A_eq, self.b_eq, "A_eq/b_eq", n)
        F_eq = np.asarray(self.F_eq, dtype=float).reshape(-1, q)
        if F_eq.shape[0] != A_eq.shape[0]:
            raise DimensionMismatch("F_eq must have one row per equality")
        A_t, b_t = pair(self.A_theta, self.b_theta, "A_theta/b_theta", q)
        if H.shape[0] != n:
            raise DimensionMismatch("H must have one row per variable")
        for name, val in (("A", A), ("b", b), ("F", F), ("A_eq", A_eq),
                          ("b_eq", b_eq), ("F_eq", F_eq), ("A_theta", A_t),
                          ("b_theta", b_t)):
            object.__setattr__(self, name, val)

    @property
    def x_dim(self) -> int:
        return self.c.size

    @property
    def theta_dim(self) -> int:
        return self.H.shape[1]

    @property
    def n_ineq(self) -> int:
        return self.A.shape[0]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    def lp_at(self, theta: np.ndarray) -> StandardLp:
        """The plain LP obtained by freezing theta."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.theta_dim:
            raise DimensionMismatch("theta has the wrong length")
        return StandardLp(
            c=self.c + self.H @ theta,
            A_ub=self.A, b_ub=self.b + self.F @ theta,
            A_eq=self.A_eq if self.n_eq else None,
            b_eq=(self.b_eq + self.F_eq @ theta) if self.n_eq else None,
        )

    def theta_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Tight per-coordinate bounds of Theta; raises if unbounded."""
        q = self.theta_dim
        lo, hi = bounding_box(self.A_theta, self.b_theta)
        for j in range(q):
            for sense, arr in ((1.0, hi), (-1.0, lo)):
                if np.isfinite(arr[j]):
                    continue
                cvec = np.zeros(q)
                cvec[j] = -sense
                sol = solve_lp(StandardLp(c=cvec, A_ub=self.A_theta,
                                          b_ub=self.b_theta))
                if not sol.is_optimal:
                    raise DimensionMismatch(
                        f"Theta is unbounded in coordinate {j}")
                arr[j] = sense * -sol.objective if sense > 0 else sol.objective
        return lo, hi


@dataclass
class CriticalRegion:
    """One polytope of the explicit solution with its affine maps.

    `active_set` lists the inequality rows of the square active-set
    system (equalities are implicitly active).  The dual map rows follow
    the stack order [active inequalities..., equalities...].
    """

    E: np.ndarray
    f: np.ndarray
    A_aff: np.ndarray
    b_aff: np.ndarray
    G: np.ndarray
    g: np.ndarray
    active_set: tuple[int, ...]
    chebyshev_center: np.ndarray
    chebyshev_radius: float

    def contains(self, theta: np.ndarray, tol: float = MEMBER_TOL) -> bool:
        return bool(np.all(self.E @ theta - self.f <= tol))


@dataclass
class MpSolution:
    """The full explicit solution: regions plus the problem they solve."""

    problem: MpLp
    regions: list[CriticalRegion]
    theta_dim: int
    x_dim: int
    _boxes: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list,
                                                        repr=False)
    _scan: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self._boxes:
            self._boxes = [bounding_box(r.E, r.f) for r in self.regions]
        # stacked rows for a one-shot membership scan over all regions
        starts = np.cumsum([0] + [r.E.shape[0] for r in self.regions])[:-1]
        E_all = np.vstack([r.E for r in self.regions])
        f_all = np.concatenate([r.f for r in self.regions])
        self._scan = (E_all, f_all, starts)

    @property
    def n_regions(self) -> int:
        return len(self.regions)


def evaluate_primal(region: CriticalRegion, theta: np.ndarray) -> np.ndarray:
    """x*(theta) = A_aff theta + b_aff; caller guarantees membership."""
    return region.A_aff @ np.asarray(theta, dtype=float) + region.b_aff


def evaluate_value(region: CriticalRegion, problem: MpLp,
                   theta: np.ndarray) -> float:
    """Exact optimal value (c + H theta)' x*(theta)."""
    theta = np.asarray(theta, dtype=float)
    x = region.A_aff @ theta + region.b_aff
    return float((problem.c + problem.H @ theta) @ x)


def evaluate_duals(region: CriticalRegion, theta: np.ndarray) -> np.ndarray:
    """Affine dual map over the active rows (inequalities first, then equalities)."""
    return region.G @ np.asarray(theta, dtype=float) + region.g


def subgradient_wrt_master(region: CriticalRegion, layout: ThetaLayout,
                           problem: MpLp, theta: np.ndarray) -> np.ndarray:
    """Gradient of the region value with respect to the master theta slots."""
    theta = np.asarray(theta, dtype=float)
    cost = problem.c + problem.H @ theta
    x = region.A_aff @ theta + region.b_aff
    grad = region.A_aff.T @ cost + problem.H.T @ x
    return grad[list(layout.master_idx)]


def locate_region(solution: MpSolution, theta: np.ndarray,
                  tol: float = MEMBER_TOL) -> int:
    """Smallest region index containing theta; pure read.

    The scan is one matrix-vector product over the stacked region rows;
    the first region whose worst row violation stays within `tol` wins,
    which keeps the lowest-index tie-break on shared facets.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.size != solution.theta_dim:
        raise DimensionMismatch(
            f"theta has {theta.size} entries, expected {solution.theta_dim}")
    E_all, f_all, starts = solution._scan
    worst = np.maximum.reduceat(E_all @ theta - f_all, starts)
    hit = np.flatnonzero(worst <= tol)
    if hit.size == 0:
        raise NoRegionFound("theta lies in no stored critical region")
    return int(hit[0])


# ---------------------------------------------------------------------------
# embedding of Benders scenario subproblems


def embed_subproblem(spec: ScenarioSubproblemSpec) -> tuple[MpLp, ThetaLayout]:
    """Write a scenario subproblem as a parametric LP over (x_w, z).

    The parameter vector stacks the master copy values, the random cost
    slots and the random rhs slots, in that order.  Equality rows carry
    the copies (z = theta_master), F places unit entries into the random
    rhs slots and H maps the random cost slots into the cost vector.
    """
    n_x = spec.n_x
    n_z = spec.n_z
    n_cost = len(spec.cost_slots)
    n_rhs = len(spec.rhs_slots)
    q = n_z + n_cost + n_rhs
    n = n_x + n_z

    c = np.concatenate([spec.c_fixed, np.zeros(n_z)])
    H = np.zeros((n, q))
    for s, (var, coeff) in enumerate(spec.cost_slots):
        H[var, n_z + s] = coeff

    # declared inequality rows, then finite-bound rows of the local vars
    rows_A = [np.hstack([spec.A, spec.C])] if spec.A.shape[0] else []
    rows_b = [spec.b_fixed] if spec.A.shape[0] else []
    m_decl = spec.A.shape[0]
    bound_rows = []
    bound_rhs = []
    for j in range(n_x):
        if np.isfinite(spec.lb[j]):
            row = np.zeros(n)
            row[j] = -1.0
            bound_rows.append(row)
            bound_rhs.append(-spec.lb[j])
        if np.isfinite(spec.ub[j]):
            row = np.zeros(n)
            row[j] = 1.0
            bound_rows.append(row)
            bound_rhs.append(spec.ub[j])
    if bound_rows:
        rows_A.append(np.array(bound_rows))
        rows_b.append(np.array(bound_rhs))
    A = np.vstack(rows_A) if rows_A else np.zeros((0, n))
    b = np.concatenate(rows_b) if rows_b else np.zeros(0)
    F = np.zeros((A.shape[0], q))
    for s, (row, coeff) in enumerate(spec.rhs_slots):
        if row >= m_decl:
            raise DimensionMismatch("rhs slot references a missing row")
        F[row, n_z + n_cost + s] = coeff

    eq_rows = [np.hstack([spec.A_eq, spec.C_eq])] if spec.A_eq.shape[0] else []
    eq_rhs = [spec.b_eq] if spec.A_eq.shape[0] else []
    copy = np.zeros((n_z, n))
    copy[:, n_x:] = np.eye(n_z)
    eq_rows.append(copy)
    eq_rhs.append(np.zeros(n_z))
    A_eq = np.vstack(eq_rows)
    b_eq = np.concatenate(eq_rhs)
    F_eq = np.zeros((A_eq.shape[0], q))
    F_eq[A_eq.shape[0] - n_z:, :n_z] = np.eye(n_z)

    lo = np.concatenate([spec.master_bounds[:, 0], spec.cost_bounds[:, 0],
                         spec.rhs_bounds[:, 0]])
    hi = np.concatenate([spec.master_bounds[:, 1], spec.cost_bounds[:, 1],
                         spec.rhs_bounds[:, 1]])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DimensionMismatch("theta slot bounds must be finite")
    A_theta = np.vstack([np.eye(q), -np.eye(q)])
    b_theta = np.concatenate([hi, -lo])

    layout = ThetaLayout(master_idx=tuple(range(n_z)),
                         cost_idx=tuple(range(n_z, n_z + n_cost)),
                         rhs_idx=tuple(range(n_z + n_cost, q)))
    problem = MpLp(c=c, H=H, A=A, b=b, F=F, A_eq=A_eq, b_eq=b_eq, F_eq=F_eq,
                   A_theta=A_theta, b_theta=b_theta)
    return problem, layout


# ---------------------------------------------------------------------------
# region enumeration


def _independent_rows(A_eq: np.ndarray, A_cand: np.ndarray,
                      order: list[int]) -> list[int]:
    """Greedy selection of candidate rows extending A_eq to full rank."""
    n = A_cand.shape[1] if A_cand.size else A_eq.shape[1]
    Q: list[np.ndarray] = []

    def try_add(row) -> bool:
        r = row.astype(float).copy()
        for qv in Q:
            r -= (r @ qv) * qv
        nrm = np.linalg.norm(r)
        if nrm <= _RANK_TOL * max(1.0, np.linalg.norm(row)):
            return False
        Q.append(r / nrm)
        return True

    for i in range(A_eq.shape[0]):
        if not try_add(A_eq[i]):
            raise RankDeficientActiveSet("equality rows are rank deficient")
    picked: list[int] = []
    for i in order:
        if len(Q) == n:
            break
        if try_add(A_cand[i]):
            picked.append(i)
    if len(Q) < n:
        raise RankDeficientActiveSet("active set does not pin down a vertex")
    return picked


def _build_region(problem: MpLp, theta0: np.ndarray, Et: np.ndarray,
                  ft: np.ndarray, perturb: bool = False):
    """Construct the critical region containing theta0, or None.

    Returns (region, signature) where the signature is the frozen set of
    selected inequality rows; the region is None for pruned slivers (the
    signature is still reported so exploration does not revisit it).
    """
    lp = problem.lp_at(theta0)
    if perturb:
        # deterministic <=1e-9 rhs perturbation to escape a degenerate basis
        m = lp.b_ub.size
        bump = 1e-9 * (1.0 + np.abs(lp.b_ub)) * (((np.arange(m) * 7919) % 13) + 1) / 13.0
        lp = StandardLp(c=lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub + bump,
                        A_eq=lp.A_eq if lp.n_eq else None,
                        b_eq=lp.b_eq if lp.n_eq else None)
    sol = solve_lp(lp)
    if not sol.is_optimal:
        return None, None

    n = problem.x_dim
    m_ub = problem.n_ineq
    basic = set(int(j) for j in sol.basis[0])
    basis_rows = [i for i in range(m_ub) if (n + i) not in basic]
    tight = [int(i) for i in sol.active_set if i < m_ub]
    # prefer the basis complement, then remaining tight rows by dual size
    extras = sorted((i for i in tight if i not in set(basis_rows)),
                    key=lambda i: (-sol.dual_ub[i], i))
    order = basis_rows + extras
    try:
        picked = _independent_rows(problem.A_eq, problem.A, order)
    except RankDeficientActiveSet:
        if not perturb:
            return _build_region(problem, theta0, Et, ft, perturb=True)
        raise
    picked = sorted(picked)

    M = np.vstack([problem.A[picked], problem.A_eq]) if problem.n_eq \
        else problem.A[picked]
    F_AS = np.vstack([problem.F[picked], problem.F_eq]) if problem.n_eq \
        else problem.F[picked]
    b_AS = np.concatenate([problem.b[picked], problem.b_eq]) if problem.n_eq \
        else problem.b[picked]
    try:
        M_inv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        if not perturb:
            return _build_region(problem, theta0, Et, ft, perturb=True)
        raise RankDeficientActiveSet("singular active-set system")
    A_aff = M_inv @ F_AS
    b_aff = M_inv @ b_AS
    K = -M_inv.T  # lambda(theta) = -(M')^{-1} (c + H theta)
    G = K @ problem.H
    g = K @ problem.c

    sig = frozenset(picked)
    inactive = [i for i in range(m_ub) if i not in sig]
    rows = []
    offs = []
    if inactive:
        rows.append(problem.A[inactive] @ A_aff - problem.F[inactive])
        offs.append(problem.b[inactive] - problem.A[inactive] @ b_aff)
    k_ineq = len(picked)
    if k_ineq:
        rows.append(-G[:k_ineq])
        offs.append(g[:k_ineq])
    rows.append(Et)
    offs.append(ft)
    E_raw = np.vstack(rows)
    f_raw = np.concatenate(offs)
    normed = normalize_rows(E_raw, f_raw)
    if normed is None:
        return None, sig
    E_n, f_n = dedupe_rows(*normed)
    center, radius = chebyshev_center(E_n, f_n)
    if center is None or radius <= RADIUS_MIN:
        return None, sig
    E_min, f_min, _ = drop_redundant_rows(E_n, f_n)
    region = CriticalRegion(E=E_min, f=f_min, A_aff=A_aff, b_aff=b_aff,
                            G=G, g=g, active_set=tuple(picked),
                            chebyshev_center=center,
                            chebyshev_radius=float(radius))
    lam = evaluate_duals(region, center)
    if k_ineq and np.min(lam[:k_ineq]) < -1e-7:
        if not perturb:
            return _build_region(problem, theta0, Et, ft, perturb=True)
        return None, sig
    return region, sig


def _feasible_theta(problem: MpLp) -> np.ndarray | None:
    """A theta in Theta with a feasible LP, pushed toward the interior."""
    n, q = problem.x_dim, problem.theta_dim
    m_ub, m_eq, m_t = problem.n_ineq, problem.n_eq, problem.A_theta.shape[0]
    # columns: x, theta, s (uniform slack to maximize)
    c = np.zeros(n + q + 1)
    c[-1] = -1.0
    A_rows = []
    b_rows = []
    if m_ub:
        A_rows.append(np.hstack([problem.A, -problem.F, np.ones((m_ub, 1))]))
        b_rows.append(problem.b)
    A_rows.append(np.hstack([np.zeros((m_t, n)), problem.A_theta,
                             np.zeros((m_t, 1))]))
    b_rows.append(problem.b_theta)
    A_eq = None
    b_eq = None
    if m_eq:
        A_eq = np.hstack([problem.A_eq, -problem.F_eq, np.zeros((m_eq, 1))])
        b_eq = problem.b_eq
    lb = np.full(n + q + 1, -np.inf)
    lb[-1] = 0.0
    ub = np.full(n + q + 1, np.inf)
    ub[-1] = 1e6
    sol = solve_lp(StandardLp(c=c, A_ub=np.vstack(A_rows),
                              b_ub=np.concatenate(b_rows),
                              A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub))
    if not sol.is_optimal:
        return None
    return sol.x[n:n + q].copy()


def enumerate_regions(problem: MpLp, strategy: str = "auto",
                      coverage_samples: int = 128,
                      rng_seed: int = 20240501) -> MpSolution:
    """Enumerate all full-dimensional critical regions of `problem`.

    `strategy` is "explore" (seed at the Chebyshev center of Theta and
    cross facets breadth-first), "enumerate" (full combinatorial
    active-set enumeration, exact on small problems) or "auto" (pick
    "enumerate" when the problem has at most 12 inequality rows).  After
    exploration a deterministic sample sweep patches any coverage gaps.
    """
    if problem.x_dim < 1:
        raise DimensionMismatch("parametric LP needs at least one variable")
    problem.theta_box()  # raises when Theta is unbounded
    normed = normalize_rows(problem.A_theta, problem.b_theta)
    if normed is None:
        raise EmptySolution("Theta is empty")
    Et, ft = normed

    if strategy == "auto":
        strategy = "enumerate" if problem.n_ineq <= 12 else "explore"
    if strategy == "enumerate":
        regions = _enumerate_combinatorial(problem, Et, ft)
    elif strategy == "explore":
        regions = _enumerate_explore(problem, Et, ft, coverage_samples, rng_seed)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    if not regions:
        if _feasible_theta(problem) is None:
            raise EmptySolution("LP infeasible over all of Theta")
        raise NumericalFailure("no full-dimensional critical region found")
    return MpSolution(problem=problem, regions=regions,
                      theta_dim=problem.theta_dim, x_dim=problem.x_dim)


def _covered(regions: list[CriticalRegion], theta: np.ndarray,
             tol: float = 1e-9) -> bool:
    return any(r.contains(theta, tol) for r in regions)


def _enumerate_explore(problem, Et, ft, coverage_samples, rng_seed):
    theta_c, radius = chebyshev_center(Et, ft)
    if theta_c is None or radius < 0:
        raise EmptySolution("Theta is empty")
    seeds = [theta_c]
    lp0 = solve_lp(problem.lp_at(theta_c))
    if not lp0.is_optimal:
        if lp0.status == "unbounded":
            raise NumericalFailure("parametric LP is unbounded at the Theta center")
        interior = _feasible_theta(problem)
        if interior is None:
            raise EmptySolution("LP infeasible over all of Theta")
        seeds = [interior]

    regions: list[CriticalRegion] = []
    seen: set[frozenset] = set()
    queue = list(seeds)
    guard = 0
    while queue:
        guard += 1
        if guard > 100_000:
            raise NumericalFailure("region exploration did not terminate")
        theta0 = queue.pop(0)
        if _covered(regions, theta0):
            continue
        region, sig = _build_region(problem, theta0, Et, ft)
        if sig is None or sig in seen:
            continue
        seen.add(sig)
        if region is None:
            continue
        if _covered(regions, region.chebyshev_center):
            continue
        regions.append(region)
        for i in range(region.E.shape[0]):
            mid, rad = facet_center(region.E, region.f, i)
            if mid is None or rad <= 1e-9:
                continue
            step = mid + FACET_STEP * region.E[i]
            if np.any(Et @ step - ft > 0.0):
                continue
            if not _covered(regions, step):
                queue.append(step)

    # deterministic sweep to patch any holes the facet walk missed
    rng = np.random.default_rng(rng_seed)
    lo, hi = problem.theta_box()
    patches = 0
    for _ in range(coverage_samples):
        theta = rng.uniform(lo, hi)
        if np.any(Et @ theta - ft > 0.0) or _covered(regions, theta):
            continue
        region, sig = _build_region(problem, theta, Et, ft)
        if sig is None or sig in seen:
            continue
        seen.add(sig)
        if region is None or _covered(regions, region.chebyshev_center):
            continue
        regions.append(region)
        patches += 1
        if patches > 1000:
            raise NumericalFailure("coverage sweep did not stabilize")
    return regions


def _enumerate_combinatorial(problem, Et, ft):
    import itertools

    n = problem.x_dim
    m_ub = problem.n_ineq
    m_eq = problem.n_eq
    k = n - m_eq
    if k < 0:
        raise DimensionMismatch("more equality rows than variables")
    regions: list[CriticalRegion] = []
    for combo in itertools.combinations(range(m_ub), k):
        picked = list(combo)
        M = np.vstack([problem.A[picked], problem.A_eq]) if m_eq \
            else problem.A[picked]
        if M.shape != (n, n) or abs(np.linalg.det(M)) < 1e-10:
            continue
        M_inv = np.linalg.inv(M)
        F_AS = np.vstack([problem.F[picked], problem.F_eq]) if m_eq \
            else problem.F[picked]
        b_AS = np.concatenate([problem.b[picked], problem.b_eq]) if m_eq \
            else problem.b[picked]
        A_aff = M_inv @ F_AS
        b_aff = M_inv @ b_AS
        K = -M_inv.T
        G = K @ problem.H
        g = K @ problem.c
        inactive = [i for i in range(m_ub) if i not in set(picked)]
        rows, offs = [], []
        if inactive:
            rows.append(problem.A[inactive] @ A_aff - problem.F[inactive])
            offs.append(problem.b[inactive] - problem.A[inactive] @ b_aff)
        if picked:
            rows.append(-G[:len(picked)])
            offs.append(g[:len(picked)])
        rows.append(Et)
        offs.append(ft)
        normed = normalize_rows(np.vstack(rows), np.concatenate(offs))
        if normed is None:
            continue
        E_n, f_n = dedupe_rows(*normed)
        center, radius = chebyshev_center(E_n, f_n)
        if center is None or radius <= RADIUS_MIN:
            continue
        if _covered(regions, center):
            continue
        E_min, f_min, _ = drop_redundant_rows(E_n, f_n)
        regions.append(CriticalRegion(
            E=E_min, f=f_min, A_aff=A_aff, b_aff=b_aff, G=G, g=g,
            active_set=tuple(picked), chebyshev_center=center,
            chebyshev_radius=float(radius)))
    return regions


# ---------------------------------------------------------------------------
# serialization


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        raise FormatError("$", "booleans are not part of the format")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if not np.isfinite(v):
        raise FormatError("$", "non-finite number in document")
    return format(v, ".17g")


def _dump(obj, out: io.TextIOBase):
    """Minimal JSON writer emitting floats with 17 significant digits."""
    if isinstance(obj, dict):
        out.write("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.write(",")
            out.write(json.dumps(k))
            out.write(":")
            _dump(v, out)
        out.write("}")
    elif isinstance(obj, (list, tuple)):
        out.write("[")
        for i, v in enumerate(obj):
            if i:
                out.write(",")
            _dump(v, out)
        out.write("]")
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    else:
        out.write(_fmt(obj))


def _flat(M: np.ndarray) -> list:
    return [float(v) for v in np.asarray(M, dtype=float).ravel(order="C")]


def save_mp(solution: MpSolution, sink) -> None:
    """Write the mp-solution document (versioned JSON, 17-digit floats)."""
    p = solution.problem
    doc = {
        "format_version": FORMAT_VERSION,
        "theta_dim": solution.theta_dim,
        "x_dim": solution.x_dim,
        "problem": {
            "c": _flat(p.c), "H": _flat(p.H),
            "A": _flat(p.A), "b": _flat(p.b), "F": _flat(p.F),
            "A_eq": _flat(p.A_eq), "b_eq": _flat(p.b_eq), "F_eq": _flat(p.F_eq),
            "A_theta": _flat(p.A_theta), "b_theta": _flat(p.b_theta),
        },
        "regions": [
            {
                "E": _flat(r.E), "f": _flat(r.f),
                "A_aff": _flat(r.A_aff), "b_aff": _flat(r.b_aff),
                "G": _flat(r.G), "g": _flat(r.g),
                "active_set": [int(i) for i in r.active_set],
                "cheb_center": _flat(r.chebyshev_center),
                "cheb_radius": float(r.chebyshev_radius),
            }
            for r in solution.regions
        ],
    }
    if hasattr(sink, "write"):
        _dump(doc, sink)
        sink.write("\n")
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            _dump(doc, fh)
            fh.write("\n")


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise FormatError(f"{path}.{key}", "missing field")
    return doc[key]


def _matrix(doc, key, rows, cols, path):
    raw = _need(doc, key, path)
    if not isinstance(raw, list):
        raise FormatError(f"{path}.{key}", "expected a flat number array")
    if len(raw) != rows * cols:
        raise FormatError(f"{path}.{key}",
                          f"expected {rows * cols} numbers, found {len(raw)}")
    try:
        arr = np.array([float(v) for v in raw], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}.{key}", "non-numeric entry") from exc
    return arr.reshape(rows, cols) if cols != 0 or rows != 0 else arr


def _vector(doc, key, size, path):
    return _matrix(doc, key, size, 1, path).ravel() if size else np.zeros(0)


def load_mp(source) -> MpSolution:
    """Read and re-validate an mp-solution document."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("$", "top level must be an object")
    version = _need(doc, "format_version", "$")
    if version != FORMAT_VERSION:
        raise FormatError("$.format_version",
                          f"unsupported version {version!r}")
    try:
        q = int(_need(doc, "theta_dim", "$"))
        n = int(_need(doc, "x_dim", "$"))
    except (TypeError, ValueError) as exc:
        raise FormatError("$", "theta_dim/x_dim must be integers") from exc
    pd = _need(doc, "problem", "$")
    if not isinstance(pd, dict):
        raise FormatError("$.problem", "expected an object")

    def free_vector(key):
        raw = _need(pd, key, "$.problem")
        try:
            return np.array([float(v) for v in raw], dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"$.problem.{key}", "non-numeric entry") from exc

    c = _vector(pd, "c", n, "$.problem")
    H = _matrix(pd, "H", n, q, "$.problem")
    b = free_vector("b")
    m_ub = b.size
    A = _matrix(pd, "A", m_ub, n, "$.problem")
    F = _matrix(pd, "F", m_ub, q, "$.problem")
    b_eq = free_vector("b_eq")
    m_eq = b_eq.size
    A_eq = _matrix(pd, "A_eq", m_eq, n, "$.problem")
    F_eq = _matrix(pd, "F_eq", m_eq, q, "$.problem")
    b_t = free_vector("b_theta")
    A_t = _matrix(pd, "A_theta", b_t.size, q, "$.problem")
    problem = MpLp(c=c, H=H, A=A, b=b, F=F, A_eq=A_eq, b_eq=b_eq, F_eq=F_eq,
                   A_theta=A_t, b_theta=b_t)

    raw_regions = _need(doc, "regions", "$")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise FormatError("$.regions", "expected a non-empty array")
    regions = []
    for v, rd in enumerate(raw_regions):
        path = f"$.regions[{v}]"
        if not isinstance(rd, dict):
            raise FormatError(path, "expected an object")
        try:
            f_vec = np.array([float(x) for x in _need(rd, "f", path)],
                             dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}.f", "non-numeric entry") from exc
        rows = f_vec.size
        E = _matrix(rd, "E", rows, q, path)
        A_aff = _matrix(rd, "A_aff", n, q, path)
        b_aff = _vector(rd, "b_aff", n, path)
        active = _need(rd, "active_set", path)
        if not isinstance(active, list) or any(
                not isinstance(i, int) or i < 0 or i >= m_ub for i in active):
            raise FormatError(f"{path}.active_set", "invalid row indices")
        g_vec = _vector(rd, "g", len(active) + m_eq, path)
        G = _matrix(rd, "G", len(active) + m_eq, q, path)
        center = _vector(rd, "cheb_center", q, path)
        radius = float(_need(rd, "cheb_radius", path))
        region = CriticalRegion(E=E, f=f_vec, A_aff=A_aff, b_aff=b_aff,
                                G=G, g=g_vec, active_set=tuple(active),
                                chebyshev_center=center,
                                chebyshev_radius=radius)
        _validate_region(problem, region, path)
        regions.append(region)
    return MpSolution(problem=problem, regions=regions, theta_dim=q, x_dim=n)


def _validate_region(problem: MpLp, region: CriticalRegion, path: str):
    if region.chebyshev_radius <= RADIUS_MIN:
        raise FormatError(f"{path}.cheb_radius", "region is not full-dimensional")
    norms = np.linalg.norm(region.E, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise FormatError(f"{path}.E", "rows are not unit-normalized")
    theta = region.chebyshev_center
    if not region.contains(theta, 1e-9):
        raise FormatError(f"{path}.cheb_center", "center is not interior")
    x = evaluate_primal(region, theta)
    if problem.n_ineq and np.any(
            problem.A @ x - problem.b - problem.F @ theta > 1e-7):
        raise FormatError(f"{path}.A_aff", "primal map infeasible at the center")
    if problem.n_eq and np.any(np.abs(
            problem.A_eq @ x - problem.b_eq - problem.F_eq @ theta) > 1e-7):
        raise FormatError(f"{path}.A_aff", "primal map violates equalities")
    lam = evaluate_duals(region, theta)
    k = len(region.active_set)
    if k and np.min(lam[:k]) < -1e-7:
        raise FormatError(f"{path}.G", "dual map negative at the center")
    stack = [problem.A[list(region.active_set)]] if k else []
    if problem.n_eq:
        stack.append(problem.A_eq)
    if stack:
        M = np.vstack(stack)
        resid = problem.c + problem.H @ theta + M.T @ lam
        if np.max(np.abs(resid)) > 1e-7:
            raise FormatError(f"{path}.G", "stationarity violated at the center")
