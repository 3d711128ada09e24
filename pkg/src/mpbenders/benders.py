"""Benders decomposition driver.

Each iteration solves the master (a mixed-binary program carrying the
accumulated cutting planes), freezes the complicating variables, asks an
oracle for every subproblem's value and subgradient, and adds one cut
per subproblem (multi-cut) or one probability-weighted aggregate cut
(single-cut).  The lower bound is the master objective, the upper bound
the running minimum of first-stage cost plus weighted subproblem values.

Oracles are interchangeable: the exact oracle re-solves the subproblem
LP with the copies fixed; the parametric oracle locates the critical
region of [x_master, scenario data] and evaluates the stored affine
maps.  Both return supporting hyperplanes of the same value function, so
the cut stream -- and the converged objective -- coincide.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from mpbenders.graph import BendersPartition, ModelGraph, extract_benders_partition
from mpbenders.lp import SolverError, StandardLp, solve_lp_fixed
from mpbenders.milp import MixedBinaryLp, solve_milp
from mpbenders.mplp import (
    MpSolution,
    NoRegionFound,
    ThetaLayout,
    evaluate_value,
    locate_region,
    subgradient_wrt_master,
)
from mpbenders.subproblem import ScenarioSubproblemSpec

__all__ = [
    "Cut",
    "OracleResult",
    "SubproblemOracle",
    "ExactOracle",
    "MpOracle",
    "BendersConfig",
    "BendersState",
    "IterationRecord",
    "MasterInfeasible",
    "OracleFailure",
    "build_master_with_cuts",
    "run",
    "record_trajectory",
]


class MasterInfeasible(SolverError):
    """The master program is infeasible; the model itself is broken."""


class OracleFailure(SolverError):
    """A subproblem evaluation failed; carries the subproblem id."""

    def __init__(self, sub_id: str, message: str):
        self.sub_id = sub_id
        super().__init__(f"subproblem {sub_id!r}: {message}")


@dataclass(frozen=True)
class Cut:
    """Optimality cut alpha >= intercept + coeffs'(x_m - anchor).

    `scope` is the subproblem id, or "aggregate" for single-cut rows;
    `cols` are the master columns the coefficients act on.  The stored
    intercept equals the subproblem value at the anchor, so the cut is
    tight at its generation point by construction.
    """

    scope: str
    intercept: float
    coeffs: np.ndarray
    cols: tuple[int, ...]
    anchor: np.ndarray
    iteration: int
    kind: str = "optimality"

    def value_at(self, x_cols: np.ndarray) -> float:
        return float(self.intercept + self.coeffs @ (x_cols - self.anchor))


@dataclass
class OracleResult:
    value: float
    subgradient: np.ndarray  # over the spec's master copy slots
    region_id: int | None = None


class SubproblemOracle:
    """Interface: evaluate one subproblem at a master iterate.

    Implementations must return a supporting hyperplane of the
    subproblem value function: value at x_master and a subgradient over
    the copy slots.  Evaluations are pure and safe to run concurrently.
    """

    def evaluate(self, spec: ScenarioSubproblemSpec,
                 x_master: np.ndarray) -> OracleResult:
        raise NotImplementedError


class ExactOracle(SubproblemOracle):
    """Re-solve the subproblem LP with the copies fixed to x_master."""

    def __init__(self):
        self._lp_cache: dict[str, StandardLp] = {}
        self._basis: dict[str, tuple] = {}

    def evaluate(self, spec, x_master):
        lp = self._lp_cache.get(spec.sub_id)
        if lp is None:
            lp = spec.to_standard_lp()
            self._lp_cache[spec.sub_id] = lp
        fixed = {spec.n_x + i: float(x_master[i]) for i in range(spec.n_z)}
        sol = solve_lp_fixed(lp, fixed, basis=self._basis.get(spec.sub_id))
        if not sol.is_optimal:
            raise OracleFailure(spec.sub_id,
                                f"exact subproblem solve ended {sol.status}")
        self._basis[spec.sub_id] = sol.basis
        lam = np.array([-sol.fixing_duals[spec.n_x + i]
                        for i in range(spec.n_z)])
        return OracleResult(value=float(sol.objective), subgradient=lam)


class MpOracle(SubproblemOracle):
    """Region lookup plus affine evaluation on a precomputed solution.

    One parametric solution serves every scenario and period: the
    scenario data only moves the query point.  With `fallback` set, a
    query outside every region is answered by an exact solve instead of
    failing.
    """

    def __init__(self, solution: MpSolution, layout: ThetaLayout,
                 fallback: bool = False,
                 scenario_data: dict[str, tuple[np.ndarray, np.ndarray]] | None = None):
        if solution.theta_dim != layout.theta_dim:
            raise ValueError("layout does not match the parametric solution")
        self.solution = solution
        self.layout = layout
        self.fallback = fallback
        self.scenario_data = scenario_data or {}
        self._exact = ExactOracle()

    def evaluate(self, spec, x_master):
        slots = self.scenario_data.get(spec.sub_id)
        if slots is not None:
            cost_vals, rhs_vals = slots
            theta = np.concatenate([np.asarray(x_master, dtype=float),
                                    cost_vals, rhs_vals])
        else:
            theta = spec.theta_at(x_master)
        try:
            v = locate_region(self.solution, theta)
        except NoRegionFound as exc:
            if self.fallback:
                return self._exact.evaluate(spec, x_master)
            raise OracleFailure(spec.sub_id,
                                f"no critical region at theta={theta!r}") from exc
        region = self.solution.regions[v]
        value = evaluate_value(region, self.solution.problem, theta)
        lam = subgradient_wrt_master(region, self.layout,
                                     self.solution.problem, theta)
        return OracleResult(value=value, subgradient=lam, region_id=v)


@dataclass
class BendersConfig:
    cut_mode: str = "multi"          # "multi" | "single"
    oracle_mode: str = "exact"       # "exact" | "mp" | "mp-fallback"
    tol: float = 1e-6                # relative gap
    max_iter: int = 500
    alpha_lower_bound: float = -1e9
    probabilities: np.ndarray | None = None  # validated when provided

    def __post_init__(self):
        if self.cut_mode not in ("multi", "single"):
            raise ValueError(f"unknown cut mode {self.cut_mode!r}")
        if self.oracle_mode not in ("exact", "mp", "mp-fallback"):
            raise ValueError(f"unknown oracle mode {self.oracle_mode!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=float)
            if abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("probabilities must sum to 1")
            self.probabilities = p


@dataclass
class IterationRecord:
    iteration: int
    lb: float
    ub: float
    rel_gap: float
    master_time: float
    sub_time: float
    cuts_added: int
    regions: list  # (scenario, period, region_id-or-None) per subproblem
    x_master: np.ndarray | None = None


@dataclass
class BendersState:
    iteration: int = 0
    lb: float = -np.inf
    ub: float = np.inf
    incumbent: np.ndarray | None = None
    incumbent_sub_values: dict[str, float] = field(default_factory=dict)
    cuts: list[Cut] = field(default_factory=list)
    log: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    objective: float | None = None

    def rel_gap(self) -> float:
        return (self.ub - self.lb) / max(1.0, abs(self.ub))


def build_master_with_cuts(partition: BendersPartition, cuts: list[Cut],
                           cfg: BendersConfig) -> MixedBinaryLp:
    """Master program with cost-to-go columns and all accumulated cuts.

    Multi-cut: one alpha per subproblem, weighted into the objective,
    one row per cut.  Single-cut: one alpha, one aggregated row per
    iteration.  Every alpha is bounded below by cfg.alpha_lower_bound.
    """
    base = partition.master.base
    n_m = base.n_vars
    subs = partition.subs
    if cfg.cut_mode == "multi":
        alpha_of = {s.sub_id: n_m + i for i, s in enumerate(subs)}
        n_alpha = len(subs)
        alpha_weight = np.array([s.weight for s in subs])
    else:
        alpha_of = {}
        n_alpha = 1 if subs else 0
        alpha_weight = np.ones(n_alpha)
    width = n_m + n_alpha

    c = np.concatenate([base.c, alpha_weight])
    lb = np.concatenate([base.lb, np.full(n_alpha, cfg.alpha_lower_bound)])
    ub = np.concatenate([base.ub, np.full(n_alpha, np.inf)])

    rows = []
    rhs = []
    if base.n_ub:
        rows.append(np.hstack([base.A_ub, np.zeros((base.n_ub, n_alpha))]))
        rhs.append(base.b_ub)
    for cut in cuts:
        # coeffs' x - alpha <= coeffs' anchor - intercept
        row = np.zeros(width)
        for c_j, col in zip(cut.coeffs, cut.cols):
            row[col] += c_j
        a_col = alpha_of[cut.scope] if cfg.cut_mode == "multi" else n_m
        row[a_col] = -1.0
        rows.append(row[None, :])
        rhs.append(np.array([float(cut.coeffs @ cut.anchor - cut.intercept)]))
    A_ub = np.vstack(rows) if rows else None
    b_ub = np.concatenate(rhs) if rows else None
    A_eq = np.hstack([base.A_eq, np.zeros((base.n_eq, n_alpha))]) \
        if base.n_eq else None
    return MixedBinaryLp(
        base=StandardLp(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq,
                        b_eq=base.b_eq if base.n_eq else None, lb=lb, ub=ub),
        binary_idx=partition.master.binary_idx)


def make_oracle(cfg: BendersConfig, mp_solution: MpSolution | None = None,
                layout: ThetaLayout | None = None) -> SubproblemOracle:
    if cfg.oracle_mode == "exact":
        return ExactOracle()
    if mp_solution is None or layout is None:
        raise ValueError("mp oracle modes need a parametric solution and layout")
    return MpOracle(mp_solution, layout, fallback=cfg.oracle_mode == "mp-fallback")


def run(g: ModelGraph, cfg: BendersConfig,
        oracle: SubproblemOracle) -> BendersState:
    """Iterate to the configured relative gap or the iteration cap.

    Subproblem results are merged in subproblem order before any cut is
    added, so runs are reproducible regardless of evaluation order.
    """
    partition = extract_benders_partition(g)
    state = BendersState()
    first_stage_cost = partition.master_first_stage_cost

    for it in range(1, cfg.max_iter + 1):
        state.iteration = it
        t0 = time.perf_counter()
        master = build_master_with_cuts(partition, state.cuts, cfg)
        msol = solve_milp(master)
        t_master = time.perf_counter() - t0
        if msol.status != "optimal":
            raise MasterInfeasible(f"master ended {msol.status} at iteration {it}")
        x_master = msol.x[:partition.master.base.n_vars]
        state.lb = max(state.lb, msol.objective)

        t1 = time.perf_counter()
        results: list[tuple[ScenarioSubproblemSpec, OracleResult]] = []
        for spec in partition.subs:
            x_sub = x_master[list(spec.master_cols)]
            try:
                res = oracle.evaluate(spec, x_sub)
            except OracleFailure:
                raise
            except SolverError as exc:
                raise OracleFailure(spec.sub_id, str(exc)) from exc
            results.append((spec, res))
        t_sub = time.perf_counter() - t1

        stage_cost = float(first_stage_cost @ x_master)
        total = stage_cost + sum(s.weight * r.value for s, r in results)
        if total < state.ub:
            state.ub = total
            state.incumbent = x_master.copy()
            state.incumbent_sub_values = {
                s.sub_id: r.value for s, r in results}

        new_cuts = []
        if cfg.cut_mode == "multi":
            for spec, res in results:
                new_cuts.append(Cut(
                    scope=spec.sub_id, intercept=res.value,
                    coeffs=res.subgradient.copy(),
                    cols=spec.master_cols,
                    anchor=x_master[list(spec.master_cols)].copy(),
                    iteration=it))
        else:
            cols = sorted({c for s in partition.subs for c in s.master_cols})
            col_pos = {c: i for i, c in enumerate(cols)}
            coeffs = np.zeros(len(cols))
            intercept = 0.0
            for spec, res in results:
                intercept += spec.weight * res.value
                for c_j, col in zip(res.subgradient, spec.master_cols):
                    coeffs[col_pos[col]] += spec.weight * c_j
            new_cuts.append(Cut(
                scope="aggregate", intercept=intercept, coeffs=coeffs,
                cols=tuple(cols), anchor=x_master[cols].copy(), iteration=it))
        state.cuts.extend(new_cuts)

        regions = [(s.scenario if s.scenario is not None else s.sub_id,
                    s.period, r.region_id) for s, r in results]
        state.log.append(IterationRecord(
            iteration=it, lb=state.lb, ub=state.ub, rel_gap=state.rel_gap(),
            master_time=t_master, sub_time=t_sub,
            cuts_added=len(new_cuts), regions=regions,
            x_master=x_master.copy()))

        if state.rel_gap() <= cfg.tol:
            state.converged = True
            state.objective = state.ub
            break
    return state


def record_trajectory(state: BendersState) -> list[tuple]:
    """Rows (iteration, scenario, period, region_id) for every evaluation.

    Exact-oracle evaluations carry a None region id.
    """
    rows = []
    for rec in state.log:
        for scenario, period, region_id in rec.regions:
            rows.append((rec.iteration, scenario, period, region_id))
    return rows
