"""Scenario subproblem description shared by the partitioner, the
parametric embedding and the Benders oracles.

A spec is numerically complete (the sampled scenario data is baked into
`cost_slot_values` / `rhs_slot_values`), and optionally annotated with
which cost entries and rhs entries those values landed in, so the same
object can be solved directly or re-read as a parametric LP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpbenders.lp import DimensionMismatch, StandardLp

__all__ = ["ScenarioSubproblemSpec"]


def _arr(v, dtype=float) -> np.ndarray:
    return np.asarray(v, dtype=dtype)


@dataclass(frozen=True)
class ScenarioSubproblemSpec:
    """One scenario subproblem with copy variables z for the master links.

    Rows read  A x + C z <= b_fixed (+ rhs slots)  and
    A_eq x + C_eq z = b_eq; the objective over x is c_fixed (+ cost
    slots).  `master_cols` maps each z slot to its master column.
    """

    sub_id: str
    c_fixed: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    A: np.ndarray
    C: np.ndarray
    b_fixed: np.ndarray
    A_eq: np.ndarray
    C_eq: np.ndarray
    b_eq: np.ndarray
    master_cols: tuple[int, ...]
    weight: float = 1.0
    cost_slots: tuple[tuple[int, float], ...] = ()
    rhs_slots: tuple[tuple[int, float], ...] = ()
    cost_slot_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rhs_slot_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    master_bounds: np.ndarray | None = None
    cost_bounds: np.ndarray | None = None
    rhs_bounds: np.ndarray | None = None
    var_names: tuple[str, ...] = ()
    scenario: int | None = None
    period: int | None = None

    def __post_init__(self):
        c = _arr(self.c_fixed)
        n_x = c.size
        object.__setattr__(self, "c_fixed", c)
        object.__setattr__(self, "lb", _arr(self.lb))
        object.__setattr__(self, "ub", _arr(self.ub))
        if self.lb.size != n_x or self.ub.size != n_x:
            raise DimensionMismatch("bounds must match the local variable count")
        n_z = len(self.master_cols)
        A = _arr(self.A).reshape(-1, n_x)
        C = _arr(self.C).reshape(-1, n_z) if n_z else np.zeros((A.shape[0], 0))
        b = _arr(self.b_fixed)
        if A.shape[0] != b.size or C.shape[0] != A.shape[0]:
            raise DimensionMismatch("inequality blocks are inconsistent")
        A_eq = _arr(self.A_eq).reshape(-1, n_x)
        C_eq = _arr(self.C_eq).reshape(-1, n_z) if n_z else np.zeros((A_eq.shape[0], 0))
        b_eq = _arr(self.b_eq)
        if A_eq.shape[0] != b_eq.size or C_eq.shape[0] != A_eq.shape[0]:
            raise DimensionMismatch("equality blocks are inconsistent")
        for name, val in (("A", A), ("C", C), ("b_fixed", b), ("A_eq", A_eq),
                          ("C_eq", C_eq), ("b_eq", b_eq)):
            object.__setattr__(self, name, val)

        cv = _arr(self.cost_slot_values)
        rv = _arr(self.rhs_slot_values)
        if cv.size != len(self.cost_slots) or rv.size != len(self.rhs_slots):
            raise DimensionMismatch("slot values must match slot annotations")
        object.__setattr__(self, "cost_slot_values", cv)
        object.__setattr__(self, "rhs_slot_values", rv)
        for var, _ in self.cost_slots:
            if not 0 <= var < n_x:
                raise DimensionMismatch(f"cost slot variable {var} out of range")
        for row, _ in self.rhs_slots:
            if not 0 <= row < A.shape[0]:
                raise DimensionMismatch(f"rhs slot row {row} out of range")

        def bounds(raw, count, fallback):
            if raw is None:
                return np.tile(fallback, (count, 1))
            arr = _arr(raw).reshape(count, 2)
            return arr

        object.__setattr__(self, "master_bounds",
                           bounds(self.master_bounds, n_z, (0.0, 1.0)))
        object.__setattr__(self, "cost_bounds",
                           bounds(self.cost_bounds, len(self.cost_slots), (0.0, 1.0)))
        object.__setattr__(self, "rhs_bounds",
                           bounds(self.rhs_bounds, len(self.rhs_slots), (0.0, 1.0)))

    @property
    def n_x(self) -> int:
        return self.c_fixed.size

    @property
    def n_z(self) -> int:
        return len(self.master_cols)

    @property
    def c_concrete(self) -> np.ndarray:
        c = self.c_fixed.copy()
        for (var, coeff), val in zip(self.cost_slots, self.cost_slot_values):
            c[var] += coeff * val
        return c

    @property
    def b_concrete(self) -> np.ndarray:
        b = self.b_fixed.copy()
        for (row, coeff), val in zip(self.rhs_slots, self.rhs_slot_values):
            b[row] += coeff * val
        return b

    def to_standard_lp(self, fold_single_rows: bool = True) -> StandardLp:
        """The concrete LP over the stacked columns [x, z].

        With `fold_single_rows` inequality rows touching a single x column
        (and no z) are folded into the variable bounds, which keeps the
        simplex basis small; the optimal value and the fixing duals on z
        are unaffected.
        """
        n_x, n_z = self.n_x, self.n_z
        c = np.concatenate([self.c_concrete, np.zeros(n_z)])
        lb = np.concatenate([self.lb, np.full(n_z, -np.inf)])
        ub = np.concatenate([self.ub, np.full(n_z, np.inf)])
        b = self.b_concrete
        keep = np.ones(self.A.shape[0], dtype=bool)
        if fold_single_rows:
            for i in range(self.A.shape[0]):
                if n_z and np.any(self.C[i] != 0.0):
                    continue
                nz = np.flatnonzero(self.A[i] != 0.0)
                if nz.size != 1:
                    continue
                j = nz[0]
                a = self.A[i, j]
                if a > 0:
                    ub[j] = min(ub[j], b[i] / a)
                else:
                    lb[j] = max(lb[j], b[i] / a)
                keep[i] = False
        A_full = np.hstack([self.A, self.C])[keep]
        b_full = b[keep]
        A_eq = np.hstack([self.A_eq, self.C_eq]) if self.A_eq.shape[0] else None
        return StandardLp(c=c, A_ub=A_full if A_full.size else None,
                          b_ub=b_full if A_full.size else None,
                          A_eq=A_eq, b_eq=self.b_eq if self.A_eq.shape[0] else None,
                          lb=lb, ub=ub)

    def theta_at(self, x_master: np.ndarray) -> np.ndarray:
        """Parameter vector [x_master, cost values, rhs values]."""
        x_master = np.asarray(x_master, dtype=float)
        if x_master.size != self.n_z:
            raise DimensionMismatch("master value vector has the wrong length")
        return np.concatenate([x_master, self.cost_slot_values,
                               self.rhs_slot_values])
