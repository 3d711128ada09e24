"""Capacity-expansion planning benchmark.

Three continuous processes convert two purchasable raw chemicals into
one sellable product over a T-period horizon.  First-stage decisions
expand process capacities (binary trigger + continuous size, cumulative
cap); second-stage recourse chooses production, purchases and sales
after market uncertainty (availabilities, demand, prices) is revealed.

Variable roles in the recourse LP: s_j buys chemical j (bounded by its
availability, priced phi_j), b_j sells chemical j (bounded by its
demand, priced gamma_j), p_p runs process p at operating cost sigma_p;
the material balance reads sum_p (mu_jp - eta_jp) p_p - b_j + s_j = 0
and the objective minimizes sigma'p + phi's - gamma'b (negative profit).

A single parametric solution of this subproblem serves every scenario
and period: the 12 parameters are the three master capacities, the
three operating costs, the three uncertain prices and the three
uncertain market quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mpbenders.graph import LinkConstraint, ModelGraph, ModelNode
from mpbenders.subproblem import ScenarioSubproblemSpec

__all__ = [
    "CepData",
    "ScenarioSet",
    "default_data",
    "sample_scenarios",
    "build_subproblem_spec",
    "build_graph",
    "scenario_slot_values",
]

N_PROC = 3
N_CHEM = 3

# base-case means for t = 1..4; rows are processes/chemicals
_ALPHA = [[1.38, 1.67, 2.22, 3.58],
          [2.72, 3.291, 4.381, 7.055],
          [1.76, 2.13, 2.834, 4.565]]
_BETA = [[85.0, 102.85, 136.89, 220.46],
         [73.0, 88.33, 117.56, 189.34],
         [110.0, 133.10, 177.15, 285.31]]
_SIGMA = [[0.40, 0.48, 0.64, 1.03],
          [0.60, 0.72, 0.96, 1.55],
          [0.50, 0.60, 0.80, 1.29]]
_AVAIL = [[6.00, 7.26, 9.66, 15.56],
          [20.00, 24.20, 32.21, 51.87],
          [0.0, 0.0, 0.0, 0.0]]
_DEMAND = [[0.0, 0.0, 0.0, 0.0],
           [0.0, 0.0, 0.0, 0.0],
           [30.00, 36.30, 48.31, 77.81]]
_PRICE_SALE = [[0.0, 0.0, 0.0, 0.0],
               [0.0, 0.0, 0.0, 0.0],
               [26.20, 31.70, 42.19, 67.95]]
_PRICE_BUY = [[4.00, 4.84, 6.44, 10.37],
              [9.60, 11.61, 15.46, 24.90],
              [0.0, 0.0, 0.0, 0.0]]
_EXP_LO = [1.0, 10.0, 10.0]
_EXP_HI = [6.0, 30.0, 30.0]
_CUM_CAP = [100.0, 100.0, 100.0]
# consumption eta[j][p] and yield mu[j][p]
_ETA = [[1.11, 0.0, 0.0],
        [0.0, 1.22, 1.05],
        [0.0, 0.0, 0.0]]
_MU = [[0.0, 0.0, 0.0],
       [1.0, 0.0, 0.0],
       [0.0, 1.0, 1.0]]

REL_STD = 0.1          # sampling: std = 10% of the mean
THETA_SPREAD = 0.5     # Theta box: 5 std around the period means


@dataclass(frozen=True)
class CepData:
    """Deterministic problem data over a T-period horizon (arrays are
    (3, T) except the stoichiometry and per-process bounds)."""

    T: int
    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    avail: np.ndarray
    demand: np.ndarray
    price_sale: np.ndarray
    price_buy: np.ndarray
    exp_lo: np.ndarray
    exp_hi: np.ndarray
    cum_cap: np.ndarray
    eta: np.ndarray
    mu: np.ndarray


@dataclass(frozen=True)
class ScenarioSet:
    """Sampled market realizations; arrays are (K, 3, T), weights 1/K."""

    K: int
    avail: np.ndarray
    demand: np.ndarray
    price_sale: np.ndarray
    price_buy: np.ndarray
    probabilities: np.ndarray


def _extend(series4: list[float], T: int) -> np.ndarray:
    """Table values for t <= 4; geometric growth at the t4/t3 ratio after."""
    vals = list(series4[:T]) if T <= 4 else list(series4)
    if T > 4:
        v3, v4 = series4[2], series4[3]
        ratio = v4 / v3 if v3 != 0.0 else 0.0
        for t in range(5, T + 1):
            vals.append(v4 * ratio ** (t - 4))
    return np.array(vals)


def default_data(T: int) -> CepData:
    if T < 1:
        raise ValueError("horizon must be at least one period")
    stack = lambda rows: np.vstack([_extend(r, T) for r in rows])
    return CepData(
        T=T,
        alpha=stack(_ALPHA), beta=stack(_BETA), sigma=stack(_SIGMA),
        avail=stack(_AVAIL), demand=stack(_DEMAND),
        price_sale=stack(_PRICE_SALE), price_buy=stack(_PRICE_BUY),
        exp_lo=np.array(_EXP_LO), exp_hi=np.array(_EXP_HI),
        cum_cap=np.array(_CUM_CAP),
        eta=np.array(_ETA), mu=np.array(_MU))


def sample_scenarios(data: CepData, K: int, seed: int) -> ScenarioSet:
    """Draw the six uncertain market quantities per (k, t).

    Each nonzero-mean entry is Normal(mean, 0.1 mean), truncated below at
    zero by resampling (at most 100 redraws, then clamped); zero-mean
    entries are not uncertain and stay exactly zero, consuming no draws.
    The generator is PCG64 via numpy's default_rng and draws follow the
    fixed order (k, t, quantity block, chemical).
    """
    if K < 1:
        raise ValueError("need at least one scenario")
    rng = np.random.default_rng(seed)

    def draw(mean: float) -> float:
        if mean == 0.0:
            return 0.0
        for _ in range(100):
            v = mean + REL_STD * mean * rng.standard_normal()
            if v >= 0.0:
                return v
        return 0.0

    blocks = {name: np.zeros((K, N_CHEM, data.T)) for name in
              ("avail", "demand", "price_sale", "price_buy")}
    means = {name: getattr(data, name) for name in blocks}
    for k in range(K):
        for t in range(data.T):
            for name in ("avail", "demand", "price_sale", "price_buy"):
                for j in range(N_CHEM):
                    blocks[name][k, j, t] = draw(means[name][j, t])
    return ScenarioSet(K=K, probabilities=np.full(K, 1.0 / K), **blocks)


def _theta_band(series: np.ndarray) -> tuple[float, float]:
    """[max(0, min mean - 5 std), max mean + 5 std] across the horizon."""
    lo = float(np.min(series) * (1.0 - 5.0 * REL_STD))
    hi = float(np.max(series) * (1.0 + 5.0 * REL_STD))
    return max(0.0, lo), hi


def build_subproblem_spec(data: CepData, k: int, t: int,
                          scenarios: ScenarioSet | None = None,
                          master_cols: tuple[int, ...] = (0, 1, 2),
                          weight: float = 1.0) -> ScenarioSubproblemSpec:
    """The (k, t) recourse LP, annotated with its twelve parameter slots.

    `t` is one-based.  Without a scenario set the table means stand in
    for the sampled values (k is then ignored).  Columns are
    [p1 p2 p3, b1 b2 b3, s1 s2 s3]; inequality rows are the three
    capacity couplings, the three sales caps and the three purchase
    caps, in that order.
    """
    if not 1 <= t <= data.T:
        raise ValueError(f"period {t} outside horizon 1..{data.T}")
    ti = t - 1
    if scenarios is None:
        avail = data.avail[:, ti]
        demand = data.demand[:, ti]
        gamma = data.price_sale[:, ti]
        phi = data.price_buy[:, ti]
    else:
        if not 0 <= k < scenarios.K:
            raise ValueError(f"scenario {k} outside 0..{scenarios.K - 1}")
        avail = scenarios.avail[k, :, ti]
        demand = scenarios.demand[k, :, ti]
        gamma = scenarios.price_sale[k, :, ti]
        phi = scenarios.price_buy[k, :, ti]

    n_x = 3 * N_CHEM
    P, B, S = 0, 3, 6  # column offsets of the three blocks

    A_rows, C_rows, b_vals = [], [], []
    # capacity coupling p_p <= z_p
    for p in range(N_PROC):
        row = np.zeros(n_x)
        row[P + p] = 1.0
        z = np.zeros(N_PROC)
        z[p] = -1.0
        A_rows.append(row)
        C_rows.append(z)
        b_vals.append(0.0)
    # sales bounded by demand, purchases by availability
    for j in range(N_CHEM):
        row = np.zeros(n_x)
        row[B + j] = 1.0
        A_rows.append(row)
        C_rows.append(np.zeros(N_PROC))
        b_vals.append(0.0 if data.demand[j, ti] != 0.0 else demand[j])
    for j in range(N_CHEM):
        row = np.zeros(n_x)
        row[S + j] = 1.0
        A_rows.append(row)
        C_rows.append(np.zeros(N_PROC))
        b_vals.append(0.0 if data.avail[j, ti] != 0.0 else avail[j])

    # material balance sum_p (mu - eta) p - b_j + s_j = 0
    Aeq_rows, beq_vals = [], []
    for j in range(N_CHEM):
        row = np.zeros(n_x)
        for p in range(N_PROC):
            row[P + p] = data.mu[j, p] - data.eta[j, p]
        row[B + j] = -1.0
        row[S + j] = 1.0
        Aeq_rows.append(row)
        beq_vals.append(0.0)

    # parameter slots: operating costs, buy prices, sale price; then the
    # uncertain quantities on the rhs side
    cost_slots, cost_vals, cost_bounds = [], [], []
    for p in range(N_PROC):
        cost_slots.append((P + p, 1.0))
        cost_vals.append(data.sigma[p, ti])
        cost_bounds.append(_theta_band(data.sigma[p]))
    for j in range(N_CHEM):
        if data.price_buy[j, ti] != 0.0:
            cost_slots.append((S + j, 1.0))
            cost_vals.append(phi[j])
            cost_bounds.append(_theta_band(data.price_buy[j]))
    for j in range(N_CHEM):
        if data.price_sale[j, ti] != 0.0:
            cost_slots.append((B + j, -1.0))
            cost_vals.append(gamma[j])
            cost_bounds.append(_theta_band(data.price_sale[j]))

    rhs_slots, rhs_vals, rhs_bounds = [], [], []
    for j in range(N_CHEM):
        if data.avail[j, ti] != 0.0:
            rhs_slots.append((2 * N_PROC + j, 1.0))
            rhs_vals.append(avail[j])
            rhs_bounds.append(_theta_band(data.avail[j]))
    for j in range(N_CHEM):
        if data.demand[j, ti] != 0.0:
            rhs_slots.append((N_PROC + j, 1.0))
            rhs_vals.append(demand[j])
            rhs_bounds.append(_theta_band(data.demand[j]))

    names = tuple(f"p{p + 1}" for p in range(N_PROC)) + \
        tuple(f"b{j + 1}" for j in range(N_CHEM)) + \
        tuple(f"s{j + 1}" for j in range(N_CHEM))
    return ScenarioSubproblemSpec(
        sub_id=f"s_k{k:04d}_t{t:03d}",
        c_fixed=np.zeros(n_x),
        lb=np.zeros(n_x), ub=np.full(n_x, np.inf),
        A=np.array(A_rows), C=np.array(C_rows), b_fixed=np.array(b_vals),
        A_eq=np.array(Aeq_rows), C_eq=np.zeros((N_CHEM, N_PROC)),
        b_eq=np.array(beq_vals),
        master_cols=master_cols,
        weight=weight,
        cost_slots=tuple(cost_slots),
        rhs_slots=tuple(rhs_slots),
        cost_slot_values=np.array(cost_vals),
        rhs_slot_values=np.array(rhs_vals),
        master_bounds=np.column_stack([np.zeros(N_PROC), data.cum_cap]),
        cost_bounds=np.array(cost_bounds),
        rhs_bounds=np.array(rhs_bounds),
        var_names=names,
        scenario=k, period=t)


def build_graph(data: CepData, scenarios: ScenarioSet) -> ModelGraph:
    """The full two-stage program as a master chain plus K*T satellites.

    The master subgraph holds one node per period with the expansion
    triggers, sizes and cumulative capacities; every (scenario, period)
    pair becomes a single-node subgraph whose probability enters as the
    subgraph weight, linked to the master through the three capacity
    rows.
    """
    g = ModelGraph()
    master_ids = []
    for t in range(1, data.T + 1):
        node = ModelNode(f"m_t{t:03d}")
        ti = t - 1
        for p in range(N_PROC):
            node.add_var(f"x{p + 1}", lb=0.0, ub=np.inf,
                         cost=float(data.alpha[p, ti]))
        for p in range(N_PROC):
            node.add_var(f"y{p + 1}", lb=0.0, ub=1.0,
                         cost=float(data.beta[p, ti]), binary=True)
        for p in range(N_PROC):
            node.add_var(f"q{p + 1}", lb=0.0, ub=float(data.cum_cap[p]))
        for p in range(N_PROC):
            node.add_ineq({f"x{p + 1}": 1.0,
                           f"y{p + 1}": -float(data.exp_hi[p])}, 0.0)
            node.add_ineq({f"x{p + 1}": -1.0,
                           f"y{p + 1}": float(data.exp_lo[p])}, 0.0)
        if t == 1:
            for p in range(N_PROC):
                node.add_eq({f"q{p + 1}": 1.0, f"x{p + 1}": -1.0}, 0.0)
        g.add_node(node)
        master_ids.append(node.node_id)
    for t in range(2, data.T + 1):
        for p in range(N_PROC):
            g.add_edge(LinkConstraint(
                f"cum_t{t:03d}_p{p + 1}",
                ((f"m_t{t:03d}", f"q{p + 1}", 1.0),
                 (f"m_t{t - 1:03d}", f"q{p + 1}", -1.0),
                 (f"m_t{t:03d}", f"x{p + 1}", -1.0)),
                "==", 0.0))
    g.add_subgraph("master", master_ids, weight=1.0)

    for k in range(scenarios.K):
        for t in range(1, data.T + 1):
            spec = build_subproblem_spec(data, k, t, scenarios)
            node = ModelNode(f"n_k{k:04d}_t{t:03d}")
            c = spec.c_concrete
            for j, name in enumerate(spec.var_names):
                node.add_var(name, lb=0.0, ub=np.inf, cost=float(c[j]))
            b = spec.b_concrete
            # local rows: everything except the three capacity couplings
            for i in range(N_PROC, spec.A.shape[0]):
                coeffs = {spec.var_names[j]: spec.A[i, j]
                          for j in np.flatnonzero(spec.A[i])}
                node.add_ineq(coeffs, float(b[i]))
            for i in range(spec.A_eq.shape[0]):
                coeffs = {spec.var_names[j]: spec.A_eq[i, j]
                          for j in np.flatnonzero(spec.A_eq[i])}
                node.add_eq(coeffs, float(spec.b_eq[i]))
            g.add_node(node)
            g.add_subgraph(spec.sub_id, [node.node_id],
                           weight=float(scenarios.probabilities[k]),
                           scenario=k, period=t)
            for p in range(N_PROC):
                g.add_edge(LinkConstraint(
                    f"cap_k{k:04d}_t{t:03d}_p{p + 1}",
                    ((node.node_id, f"p{p + 1}", 1.0),
                     (f"m_t{t:03d}", f"q{p + 1}", -1.0)),
                    "<=", 0.0))
    g.set_master("master")
    return g


def scenario_slot_values(data: CepData, scenarios: ScenarioSet
                         ) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-subproblem (cost values, rhs values) for the parametric oracle."""
    out = {}
    for k in range(scenarios.K):
        for t in range(1, data.T + 1):
            spec = build_subproblem_spec(data, k, t, scenarios)
            out[spec.sub_id] = (spec.cost_slot_values, spec.rhs_slot_values)
    return out
