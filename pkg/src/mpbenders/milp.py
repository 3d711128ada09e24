"""Branch and bound over the LP kernel for problems with binary variables.

Best-bound node selection, most-fractional branching (ties broken by the
lowest variable index) and basis warm starts from the parent node keep
runs deterministic and reasonably fast at desk scale.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from mpbenders.lp import (
    DimensionMismatch,
    LpSolution,
    StandardLp,
    solve_lp,
)

__all__ = ["MixedBinaryLp", "MilpSolution", "solve_milp"]

TOL_INT = 1e-6
_PRUNE_EPS = 1e-9


@dataclass(frozen=True)
class MixedBinaryLp:
    """An LP plus a set of variable indices restricted to {0, 1}."""

    base: StandardLp
    binary_idx: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(int(j) for j in self.binary_idx)
        object.__setattr__(self, "binary_idx", idx)
        n = self.base.n_vars
        for j in idx:
            if j < 0 or j >= n:
                raise DimensionMismatch(f"binary index {j} out of range")
            if self.base.lb[j] < -1e-12 or self.base.ub[j] > 1.0 + 1e-12:
                raise DimensionMismatch(
                    f"binary variable {j} must have bounds within [0, 1]")


@dataclass
class MilpSolution:
    status: str  # "optimal" | "infeasible"
    x: np.ndarray | None = None
    objective: float | None = None
    node_count: int = 0
    incumbent_history: list = None  # objective at each incumbent update

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def _most_fractional(x: np.ndarray, binary_idx: tuple[int, ...]) -> int | None:
    best_j, best_d = None, TOL_INT
    for j in binary_idx:
        d = min(x[j], 1.0 - x[j])
        if d > best_d + 1e-15:
            best_j, best_d = j, d
    return best_j


def solve_milp(p: MixedBinaryLp, max_nodes: int = 200_000) -> MilpSolution:
    """Globally optimal solve over binary assignments, LP-exact elsewhere.

    The node queue is exhausted before "optimal" is reported, so the
    returned objective carries a proof of optimality.  Raises
    NumericalFailure from the LP kernel and returns "infeasible" when no
    integral-feasible leaf exists.
    """
    lp = p.base
    root = solve_lp(lp)
    node_count = 1
    incumbent: LpSolution | None = None
    incumbent_obj = np.inf
    history: list[float] = []

    if root.status == "unbounded":
        # binaries cannot bound a ray; the continuous part is unbounded
        return MilpSolution(status="unbounded", node_count=node_count)
    if not root.is_optimal:
        return MilpSolution(status="infeasible", node_count=node_count)

    heap: list[tuple[float, int, dict[int, float], dict[int, float], tuple]] = []
    counter = 0

    def push(bound, fix_lo, fix_hi, basis):
        nonlocal counter
        heapq.heappush(heap, (bound, counter, fix_lo, fix_hi, basis))
        counter += 1

    def consider(sol: LpSolution):
        nonlocal incumbent, incumbent_obj
        frac = _most_fractional(sol.x, p.binary_idx)
        if frac is None:
            if sol.objective < incumbent_obj - 1e-15:
                incumbent, incumbent_obj = sol, sol.objective
                history.append(float(sol.objective))
            return None
        return frac

    # branching state is carried as bound overrides on the binaries
    frac = consider(root)
    if frac is not None:
        push(root.objective, {}, {frac: 0.0}, root.basis)
        push(root.objective, {frac: 1.0}, {}, root.basis)
    while heap:
        bound, _, fix_lo, fix_hi, basis = heapq.heappop(heap)
        if bound >= incumbent_obj - _PRUNE_EPS:
            continue
        if node_count >= max_nodes:
            raise RuntimeError(f"branch-and-bound exceeded {max_nodes} nodes")
        lb = lp.lb.copy()
        ub = lp.ub.copy()
        for j, v in fix_lo.items():
            lb[j] = v
        for j, v in fix_hi.items():
            ub[j] = v
        node_lp = StandardLp(c=lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub,
                             A_eq=lp.A_eq, b_eq=lp.b_eq, lb=lb, ub=ub)
        sol = solve_lp(node_lp, basis=basis)
        node_count += 1
        if not sol.is_optimal:
            continue
        if sol.objective >= incumbent_obj - _PRUNE_EPS:
            continue
        j = consider(sol)
        if j is None:
            continue
        down = dict(fix_hi)
        down[j] = 0.0
        push(sol.objective, fix_lo, down, sol.basis)
        up = dict(fix_lo)
        up[j] = 1.0
        push(sol.objective, up, fix_hi, sol.basis)

    if incumbent is None:
        return MilpSolution(status="infeasible", node_count=node_count,
                            incumbent_history=history)
    x = incumbent.x.copy()
    for j in p.binary_idx:
        x[j] = round(x[j])
    return MilpSolution(status="optimal", x=x,
                        objective=float(incumbent.objective),
                        node_count=node_count, incumbent_history=history)
