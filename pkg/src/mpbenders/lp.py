"""Dense linear-programming kernel.

Solves  min c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub
with a bounded-variable revised primal simplex.  Feasibility is reached
with a composite phase 1 (minimize total bound violation of the basic
variables), so no big-M constants enter the arithmetic.  The basis
inverse is kept explicitly and refactorized periodically.

Dual sign convention (used consistently across the package): at an
optimum the multipliers satisfy

    c + A_ub' dual_ub + A_eq' dual_eq + dual_bounds = 0

with dual_ub >= 0, so the optimal value increases when an inequality
right-hand side is tightened.  Equality duals are free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StandardLp",
    "LpSolution",
    "SolverError",
    "DimensionMismatch",
    "NumericalFailure",
    "solve_lp",
    "solve_lp_fixed",
]

TOL_FEAS = 1e-7
TOL_KKT = 1e-7
PIVOT_TOL = 1e-9

# reduced-cost tolerance for pricing; looser than PIVOT_TOL on purpose
_DJ_TOL = 1e-9
_REFACTOR_EVERY = 100

_AT_LO = 0
_AT_HI = 1
_FREE = 2
_BASIC = 3


class SolverError(Exception):
    """Base class for solver failures."""


class DimensionMismatch(SolverError):
    """Problem arrays have inconsistent shapes."""


class NumericalFailure(SolverError):
    """Pivoting stalled or exceeded the iteration cap."""


@dataclass(frozen=True)
class StandardLp:
    """Canonical constraint-matrix LP: min c'x, A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub."""

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        object.__setattr__(self, "c", c)

        def mat(M, b, name):
            if M is None:
                return np.zeros((0, n)), np.zeros(0)
            M = np.atleast_2d(np.asarray(M, dtype=float))
            b = np.atleast_1d(np.asarray(b if b is not None else [], dtype=float))
            if M.shape[1] != n:
                raise DimensionMismatch(
                    f"{name} has {M.shape[1]} columns, expected {n}")
            if M.shape[0] != b.size:
                raise DimensionMismatch(
                    f"{name} has {M.shape[0]} rows but rhs has {b.size}")
            return M, b

        A_ub, b_ub = mat(self.A_ub, self.b_ub, "A_ub")
        A_eq, b_eq = mat(self.A_eq, self.b_eq, "A_eq")
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "b_ub", b_ub)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", b_eq)

        lb = np.full(n, -np.inf) if self.lb is None else np.atleast_1d(
            np.asarray(self.lb, dtype=float)).copy()
        ub = np.full(n, np.inf) if self.ub is None else np.atleast_1d(
            np.asarray(self.ub, dtype=float)).copy()
        if lb.size != n or ub.size != n:
            raise DimensionMismatch("bound vectors must match len(c)")
        both = np.isfinite(lb) & np.isfinite(ub)
        if np.any(lb[both] > ub[both] + 1e-12):
            raise DimensionMismatch("lb > ub on some variable")
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_ub(self) -> int:
        return self.A_ub.shape[0]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]


@dataclass
class LpSolution:
    """Solver result.

    `active_set` uses combined row indexing: tight inequality rows keep
    their A_ub index, equality rows appear as n_ub + i (all of them).
    `dual_bounds` is the net bound multiplier per variable (<= 0 at a
    lower bound, >= 0 at an upper bound).  `basis` is a warm-start token
    (basic column indices plus nonbasic statuses) over the standard-form
    columns [structural | inequality slacks | equality artificials].
    """

    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    dual_bounds: np.ndarray | None = None
    active_set: np.ndarray | None = None
    iterations: int = 0
    certificate: np.ndarray | None = None
    fixing_duals: dict[int, float] | None = None
    basis: tuple | None = field(default=None, repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


class _Simplex:
    """Bounded-variable revised primal simplex over the standard columns
    [structural | slacks(ineq) | artificials(eq)]."""

    def __init__(self, lp: StandardLp):
        self.lp = lp
        n, m_ub, m_eq = lp.n_vars, lp.n_ub, lp.n_eq
        m = m_ub + m_eq
        self.n, self.m_ub, self.m_eq, self.m = n, m_ub, m_eq, m
        ncols = n + m_ub + m_eq

        A = np.zeros((m, ncols))
        A[:m_ub, :n] = lp.A_ub
        A[m_ub:, :n] = lp.A_eq
        A[:m_ub, n:n + m_ub] = np.eye(m_ub)
        A[m_ub:, n + m_ub:] = np.eye(m_eq)
        self.A = A
        self.b = np.concatenate([lp.b_ub, lp.b_eq])

        lo = np.concatenate([lp.lb, np.zeros(m_ub), np.zeros(m_eq)])
        hi = np.concatenate([lp.ub, np.full(m_ub, np.inf), np.zeros(m_eq)])
        self.lo, self.hi = lo, hi

        self.c = np.zeros(ncols)
        self.c[:n] = lp.c
        self.ncols = ncols

        self.basic = np.arange(n, ncols)  # slack/artificial start basis
        self.status = np.full(ncols, _AT_LO, dtype=np.int8)
        free = ~np.isfinite(lo) & ~np.isfinite(hi)
        at_hi = ~np.isfinite(lo) & np.isfinite(hi)
        self.status[free] = _FREE
        self.status[at_hi] = _AT_HI
        self.status[self.basic] = _BASIC

        self.x = np.zeros(ncols)
        fin_lo = np.isfinite(lo)
        self.x[fin_lo] = lo[fin_lo]
        self.x[at_hi] = hi[at_hi]
        self.x[free] = 0.0
        self.B_inv = np.eye(m)
        self._set_basics()

        self.iter_cap = 20000 + 200 * (m + n)
        self.stall_limit = 3 * (m + n)  # degenerate pivots before Bland's rule
        self.iterations = 0
        self._stall = 0
        self._bland = False
        self._since_refactor = 0

    def load_basis(self, basis: tuple) -> bool:
        """Adopt a previously returned basis token; False if unusable."""
        basic, status = basis
        if len(basic) != self.m or len(status) != self.ncols:
            return False
        basic = np.asarray(basic, dtype=int)
        if np.unique(basic).size != self.m:
            return False
        B = self.A[:, basic]
        try:
            B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(B_inv)):
            return False
        self.basic = basic.copy()
        self.status = np.asarray(status, dtype=np.int8).copy()
        self.status[self.basic] = _BASIC
        nonbasic = np.setdiff1d(np.arange(self.ncols), basic)
        for j in nonbasic:
            st = self.status[j]
            if st == _AT_LO and np.isfinite(self.lo[j]):
                self.x[j] = self.lo[j]
            elif st == _AT_HI and np.isfinite(self.hi[j]):
                self.x[j] = self.hi[j]
            else:
                self.status[j] = _FREE if not np.isfinite(self.lo[j]) else _AT_LO
                self.x[j] = self.lo[j] if np.isfinite(self.lo[j]) else 0.0
        self.B_inv = B_inv
        self._set_basics()
        return True

    def _set_basics(self):
        rhs = self.b - self.A @ self.x + self.A[:, self.basic] @ self.x[self.basic]
        self.x[self.basic] = self.B_inv @ rhs

    def _refactorize(self):
        B = self.A[:, self.basic]
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        self._set_basics()
        self._since_refactor = 0

    def _infeas(self) -> np.ndarray:
        """Signed bound violation of each basic variable (+ above hi, - below lo)."""
        xb = self.x[self.basic]
        lo_b = self.lo[self.basic]
        hi_b = self.hi[self.basic]
        out = np.zeros(self.m)
        above = xb > hi_b + TOL_FEAS
        below = xb < lo_b - TOL_FEAS
        out[above] = 1.0
        out[below] = -1.0
        return out

    def _price(self, y: np.ndarray) -> np.ndarray:
        return self.c_work - y @ self.A

    def _choose_entering(self, d: np.ndarray):
        """Return (j, sigma) improving the working objective, or None."""
        st = self.status
        elig_up = (st == _AT_LO) & (d < -_DJ_TOL)
        elig_dn = (st == _AT_HI) & (d > _DJ_TOL)
        elig_fr = (st == _FREE) & (np.abs(d) > _DJ_TOL)
        if self._bland:
            cand = np.flatnonzero(elig_up | elig_dn | elig_fr)
            if cand.size == 0:
                return None
            j = int(cand[0])
        else:
            score = np.where(elig_up | elig_dn | elig_fr, np.abs(d), -1.0)
            j = int(np.argmax(score))
            if score[j] <= 0:
                return None
        sigma = 1.0 if (st[j] == _AT_LO or (st[j] == _FREE and d[j] < 0)) else -1.0
        return j, sigma

    def _ratio_test(self, j: int, sigma: float, u: np.ndarray, phase1: bool):
        """Smallest blocking step for entering column j moving by sigma.

        Returns (t, r) where r is the blocking basic position, -1 for a
        bound flip of the entering variable, or -2 for unbounded.
        """
        xb = self.x[self.basic]
        lo_b = self.lo[self.basic]
        hi_b = self.hi[self.basic]
        delta = -sigma * u  # rate of change of basic values
        t_best = np.inf
        r_best = -2
        for i in range(self.m):
            di = delta[i]
            if abs(di) <= PIVOT_TOL:
                continue
            xi, li, hi_i = xb[i], lo_b[i], hi_b[i]
            if phase1 and xi < li - TOL_FEAS:
                # violated below: blocks when rising to lo
                if di > 0:
                    t = (li - xi) / di
                else:
                    continue  # moving further below never blocks phase 1 progress
            elif phase1 and xi > hi_i + TOL_FEAS:
                if di < 0:
                    t = (hi_i - xi) / di
                else:
                    continue
            else:
                if di > 0:
                    if not np.isfinite(hi_i):
                        continue
                    t = (hi_i - xi) / di
                else:
                    if not np.isfinite(li):
                        continue
                    t = (li - xi) / di
            if t < -1e-12:
                t = 0.0
            if t < t_best - 1e-12 or (abs(t - t_best) <= 1e-12 and r_best >= 0
                                      and self.basic[i] < self.basic[r_best]):
                t_best = t
                r_best = i
        # entering variable's own opposite bound
        span = self.hi[j] - self.lo[j]
        if np.isfinite(span) and span < t_best - 1e-12:
            return span, -1
        return t_best, r_best

    def _apply_pivot(self, j, sigma, t, r, u):
        xj_new = self.x[j] + sigma * t
        self.x[self.basic] -= sigma * t * u
        if r == -1:  # bound flip, basis unchanged
            self.x[j] = self.hi[j] if sigma > 0 else self.lo[j]
            self.status[j] = _AT_HI if sigma > 0 else _AT_LO
            return
        leave = self.basic[r]
        xl = self.x[leave]
        # snap the leaving variable to the bound it blocked at
        if np.isfinite(self.lo[leave]) and abs(xl - self.lo[leave]) <= abs(
                xl - self.hi[leave] if np.isfinite(self.hi[leave]) else np.inf):
            self.x[leave] = self.lo[leave]
            self.status[leave] = _AT_LO
        else:
            self.x[leave] = self.hi[leave]
            self.status[leave] = _AT_HI
        self.basic[r] = j
        self.status[j] = _BASIC
        self.x[j] = xj_new
        # product-form update of B_inv
        ur = u[r]
        row_r = self.B_inv[r] / ur
        u_col = u.copy()
        u_col[r] = 0.0
        self.B_inv -= np.outer(u_col, row_r)
        self.B_inv[r] = row_r
        self._since_refactor += 1
        if self._since_refactor >= _REFACTOR_EVERY:
            self._refactorize()

    def run(self):
        """Iterate to optimality; returns ('optimal'|'infeasible'|'unbounded', certificate)."""
        while True:
            if self.iterations >= self.iter_cap:
                raise NumericalFailure(
                    f"simplex exceeded iteration cap ({self.iter_cap})")
            kappa = self._infeas()
            phase1 = bool(np.any(kappa != 0.0))
            if phase1:
                self.c_work = np.zeros(self.ncols)
                y = kappa @ self.B_inv
                d = -(y @ self.A)
                d[self.basic] = 0.0
                picked = self._choose_entering(d)
                if picked is None:
                    # no improving direction: total violation is minimal and > 0
                    return "infeasible", y
            else:
                self.c_work = self.c
                y = self.c[self.basic] @ self.B_inv
                d = self.c - y @ self.A
                d[self.basic] = 0.0
                picked = self._choose_entering(d)
                if picked is None:
                    return "optimal", None
            j, sigma = picked
            u = self.B_inv @ self.A[:, j]
            t, r = self._ratio_test(j, sigma, u, phase1)
            if r == -2:
                if phase1:
                    # violation decreases without bound -- cannot happen; re-derive
                    raise NumericalFailure("phase-1 ray detected")
                ray = np.zeros(self.ncols)
                ray[j] = sigma
                ray[self.basic] = -sigma * u
                return "unbounded", ray[:self.n]
            if t <= 1e-12:
                self._stall += 1
                if self._stall > self.stall_limit:
                    self._bland = True
            else:
                self._stall = 0
            self._apply_pivot(j, sigma, t, r, u)
            self.iterations += 1

    def extract(self) -> LpSolution:
        self._refactorize()
        n, m_ub = self.n, self.m_ub
        x = self.x[:n].copy()
        y = self.c[self.basic] @ self.B_inv
        d = self.c - y @ self.A
        d[self.basic] = 0.0
        dual_ub = -y[:m_ub].copy()
        dual_eq = -y[m_ub:].copy()
        dual_ub[np.abs(dual_ub) < 1e-14] = 0.0
        np.maximum(dual_ub, 0.0, out=dual_ub)
        dual_bounds = -d[:n].copy()
        slack = self.lp.b_ub - self.lp.A_ub @ x if m_ub else np.zeros(0)
        tight = np.flatnonzero(np.abs(slack) <= 1e-8 * (1.0 + np.abs(self.lp.b_ub)))
        active = np.concatenate([tight, m_ub + np.arange(self.m_eq)]).astype(int)
        return LpSolution(
            status="optimal",
            x=x,
            objective=float(self.lp.c @ x),
            dual_ub=dual_ub,
            dual_eq=dual_eq,
            dual_bounds=dual_bounds,
            active_set=active,
            iterations=self.iterations,
            basis=(self.basic.copy(), self.status.copy()),
        )


def solve_lp(lp: StandardLp, basis: tuple | None = None) -> LpSolution:
    """Solve an LP to optimality with primal/dual/active-set reporting.

    `basis` is an opaque token from a prior solve of a problem with the
    same shape (only bounds may differ); it is used as a warm start.
    """
    sx = _Simplex(lp)
    if basis is not None:
        sx.load_basis(basis)
    status, cert = sx.run()
    if status == "optimal":
        return sx.extract()
    if status == "infeasible":
        return LpSolution(status="infeasible", certificate=cert,
                          iterations=sx.iterations)
    return LpSolution(status="unbounded", certificate=cert,
                      iterations=sx.iterations)


def solve_lp_fixed(lp: StandardLp, fixed: dict[int, float],
                   basis: tuple | None = None) -> LpSolution:
    """Solve `lp` with added equality rows x[j] = value.

    The equality duals of the added rows are exposed in
    `solution.fixing_duals` (dict keyed by variable index).  With the
    package-wide sign convention the subgradient of the optimal value
    with respect to a fixed value v_j is -fixing_duals[j].
    """
    if not fixed:
        sol = solve_lp(lp, basis=basis)
        sol.fixing_duals = {}
        return sol
    n = lp.n_vars
    idx = sorted(fixed)
    if idx and (idx[0] < 0 or idx[-1] >= n):
        raise DimensionMismatch(f"fixed index out of range for {n} variables")
    rows = np.zeros((len(idx), n))
    vals = np.zeros(len(idx))
    for r, j in enumerate(idx):
        rows[r, j] = 1.0
        vals[r] = fixed[j]
    A_eq = np.vstack([lp.A_eq, rows]) if lp.n_eq else rows
    b_eq = np.concatenate([lp.b_eq, vals]) if lp.n_eq else vals
    ext = StandardLp(c=lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub,
                     A_eq=A_eq, b_eq=b_eq, lb=lp.lb, ub=lp.ub)
    sol = solve_lp(ext, basis=basis)
    if sol.is_optimal:
        extra = sol.dual_eq[lp.n_eq:]
        sol.fixing_duals = {j: float(extra[r]) for r, j in enumerate(idx)}
        sol.dual_eq = sol.dual_eq[:lp.n_eq]
        sol.active_set = sol.active_set[sol.active_set < lp.n_ub + lp.n_eq]
    else:
        sol.fixing_duals = None
    return sol
