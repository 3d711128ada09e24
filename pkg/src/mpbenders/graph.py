"""Graph-structured model container.

Nodes own local variables, rows and a linear objective; edges own
linking rows that couple variables across nodes; named subgraphs group
nodes and carry an objective weight (scenario probability).  The graph
assembles into one mixed-binary program, and -- once a master subgraph
is designated -- splits into the Benders master plus one subproblem spec
per non-master subgraph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mpbenders.lp import DimensionMismatch, StandardLp
from mpbenders.milp import MixedBinaryLp
from mpbenders.subproblem import ScenarioSubproblemSpec

__all__ = [
    "ModelNode",
    "LinkConstraint",
    "ModelGraph",
    "ShapeError",
    "BendersPartition",
    "assemble_monolithic",
    "extract_benders_partition",
]


class ShapeError(Exception):
    """The graph does not have the master-and-satellites Benders shape."""


@dataclass
class ModelNode:
    """A node holding local variables, rows and a linear objective."""

    node_id: str
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    obj: list[float] = field(default_factory=list)
    A_ub: list[np.ndarray] = field(default_factory=list)
    b_ub: list[float] = field(default_factory=list)
    A_eq: list[np.ndarray] = field(default_factory=list)
    b_eq: list[float] = field(default_factory=list)

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf,
                cost: float = 0.0, binary: bool = False) -> int:
        if name in self.var_names:
            raise DimensionMismatch(f"duplicate variable {name!r} on {self.node_id}")
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        self.obj.append(float(cost))
        return len(self.var_names) - 1

    def _row(self, coeffs: dict[str, float]) -> np.ndarray:
        row = np.zeros(len(self.var_names))
        for name, c in coeffs.items():
            row[self.var_names.index(name)] = float(c)
        return row

    def add_ineq(self, coeffs: dict[str, float], rhs: float) -> None:
        """Local row sum(coeffs * vars) <= rhs."""
        self.A_ub.append(self._row(coeffs))
        self.b_ub.append(float(rhs))

    def add_eq(self, coeffs: dict[str, float], rhs: float) -> None:
        self.A_eq.append(self._row(coeffs))
        self.b_eq.append(float(rhs))

    @property
    def n_vars(self) -> int:
        return len(self.var_names)


@dataclass(frozen=True)
class LinkConstraint:
    """A single row coupling variables on at least two distinct nodes."""

    link_id: str
    terms: tuple[tuple[str, str, float], ...]  # (node_id, var_name, coeff)
    sense: str  # "<=", ">=", "=="
    rhs: float

    def __post_init__(self):
        nodes = {t[0] for t in self.terms}
        if len(nodes) < 2:
            raise ShapeError(
                f"link {self.link_id!r} touches one node; declare it as a local row")
        if self.sense not in ("<=", ">=", "=="):
            raise DimensionMismatch(f"unknown sense {self.sense!r}")

    def node_ids(self) -> set[str]:
        return {t[0] for t in self.terms}


class ModelGraph:
    """Nodes, linking edges, and named subgraphs with one designated master."""

    def __init__(self):
        self.nodes: dict[str, ModelNode] = {}
        self.edges: list[LinkConstraint] = []
        self.subgraphs: dict[str, list[str]] = {}
        self.weights: dict[str, float] = {}
        self.tags: dict[str, tuple[int | None, int | None]] = {}
        self.master_subgraph: str | None = None

    def add_node(self, node: ModelNode) -> ModelNode:
        if node.node_id in self.nodes:
            raise DimensionMismatch(f"duplicate node {node.node_id!r}")
        self.nodes[node.node_id] = node
        return node

    def add_edge(self, link: LinkConstraint) -> None:
        for nid in link.node_ids():
            if nid not in self.nodes:
                raise DimensionMismatch(f"edge references unknown node {nid!r}")
        self.edges.append(link)

    def add_subgraph(self, name: str, node_ids: list[str],
                     weight: float = 1.0, scenario: int | None = None,
                     period: int | None = None) -> None:
        if name in self.subgraphs:
            raise DimensionMismatch(f"duplicate subgraph {name!r}")
        for nid in node_ids:
            if nid not in self.nodes:
                raise DimensionMismatch(f"subgraph references unknown node {nid!r}")
        self.subgraphs[name] = list(node_ids)
        self.weights[name] = float(weight)
        self.tags[name] = (scenario, period)

    def set_master(self, name: str) -> None:
        if name not in self.subgraphs:
            raise DimensionMismatch(f"unknown subgraph {name!r}")
        self.master_subgraph = name

    # -- validation helpers

    def subgraph_of(self) -> dict[str, str]:
        owner: dict[str, str] = {}
        for name, ids in self.subgraphs.items():
            for nid in ids:
                if nid in owner:
                    raise ShapeError(f"node {nid!r} is in two subgraphs")
                owner[nid] = name
        missing = set(self.nodes) - set(owner)
        if missing:
            raise ShapeError(f"nodes outside any subgraph: {sorted(missing)}")
        return owner

    def check_benders_shape(self) -> None:
        """Every edge stays inside the master or couples it with exactly
        one non-master subgraph (the decomposable two-level shape)."""
        if self.master_subgraph is None:
            raise ShapeError("no master subgraph designated")
        owner = self.subgraph_of()
        for link in self.edges:
            touched = {owner[nid] for nid in link.node_ids()}
            non_master = touched - {self.master_subgraph}
            if len(non_master) > 1:
                raise ShapeError(
                    f"link {link.link_id!r} couples two non-master subgraphs")


def _column_order(g: ModelGraph) -> list[tuple[str, str]]:
    """(node, var) in (subgraph id, node id, declaration order)."""
    g.subgraph_of()  # validates the partition
    cols: list[tuple[str, str]] = []
    for sg in sorted(g.subgraphs):
        for nid in sorted(g.subgraphs[sg]):
            node = g.nodes[nid]
            for name in node.var_names:
                cols.append((nid, name))
    return cols


def _link_rows_leq(link: LinkConstraint, col_of, width: int):
    """The edge as one or two <= rows over the monolithic columns."""
    row = np.zeros(width)
    for nid, var, coeff in link.terms:
        row[col_of[(nid, var)]] += coeff
    if link.sense == "<=":
        return [(row, link.rhs)]
    if link.sense == ">=":
        return [(-row, -link.rhs)]
    return [(row, link.rhs), (-row, -link.rhs)]


def assemble_monolithic(g: ModelGraph) -> tuple[MixedBinaryLp, dict]:
    """Flatten the graph into one mixed-binary program.

    Node blocks are concatenated in (subgraph, node, declaration) order,
    link rows appended after all local rows; node objectives are scaled
    by their subgraph weight.  Returns the program and the
    (node, var) -> column map.
    """
    cols = _column_order(g)
    col_of = {cv: j for j, cv in enumerate(cols)}
    width = len(cols)
    owner = g.subgraph_of()

    c = np.zeros(width)
    lb = np.zeros(width)
    ub = np.zeros(width)
    binary: list[int] = []
    for (nid, var), j in col_of.items():
        node = g.nodes[nid]
        k = node.var_names.index(var)
        w = g.weights.get(owner[nid], 1.0)
        c[j] = w * node.obj[k]
        lb[j] = node.lb[k]
        ub[j] = node.ub[k]
        if node.binary[k]:
            binary.append(j)

    rows_ub: list[np.ndarray] = []
    rhs_ub: list[float] = []
    rows_eq: list[np.ndarray] = []
    rhs_eq: list[float] = []
    for sg in sorted(g.subgraphs):
        for nid in sorted(g.subgraphs[sg]):
            node = g.nodes[nid]
            base = col_of[(nid, node.var_names[0])] if node.n_vars else 0
            for row, rhs in zip(node.A_ub, node.b_ub):
                full = np.zeros(width)
                full[base:base + node.n_vars] = row
                rows_ub.append(full)
                rhs_ub.append(rhs)
            for row, rhs in zip(node.A_eq, node.b_eq):
                full = np.zeros(width)
                full[base:base + node.n_vars] = row
                rows_eq.append(full)
                rhs_eq.append(rhs)
    for link in g.edges:
        for row, rhs in _link_rows_leq(link, col_of, width):
            rows_ub.append(row)
            rhs_ub.append(rhs)

    base = StandardLp(
        c=c,
        A_ub=np.array(rows_ub) if rows_ub else None,
        b_ub=np.array(rhs_ub) if rows_ub else None,
        A_eq=np.array(rows_eq) if rows_eq else None,
        b_eq=np.array(rhs_eq) if rows_eq else None,
        lb=lb, ub=ub)
    return MixedBinaryLp(base=base, binary_idx=tuple(sorted(binary))), col_of


@dataclass
class BendersPartition:
    """Master program plus one scenario spec per non-master subgraph."""

    master: MixedBinaryLp
    master_cols: dict  # (node, var) -> master column
    subs: list[ScenarioSubproblemSpec]
    master_first_stage_cost: np.ndarray  # master objective over master columns


def extract_benders_partition(g: ModelGraph) -> BendersPartition:
    """Split the graph at the designated master subgraph.

    Each non-master subgraph becomes a subproblem spec with one copy
    variable per master variable that its coupling edges touch; coupling
    rows are rewritten over (x_local, z).  The master keeps its local
    rows and intra-master edges, without any cost-to-go terms.
    """
    g.check_benders_shape()
    owner = g.subgraph_of()
    master_name = g.master_subgraph

    # master program over master nodes only
    master_graph = ModelGraph()
    for nid in sorted(g.subgraphs[master_name]):
        master_graph.add_node(g.nodes[nid])
    master_graph.subgraphs = {master_name: sorted(g.subgraphs[master_name])}
    master_graph.weights = {master_name: 1.0}
    for link in g.edges:
        if all(owner[nid] == master_name for nid in link.node_ids()):
            master_graph.edges.append(link)
    master, master_cols = assemble_monolithic(master_graph)

    subs: list[ScenarioSubproblemSpec] = []
    for sg in sorted(g.subgraphs):
        if sg == master_name:
            continue
        node_ids = sorted(g.subgraphs[sg])
        local_cols: list[tuple[str, str]] = []
        for nid in node_ids:
            for name in g.nodes[nid].var_names:
                local_cols.append((nid, name))
        local_of = {cv: j for j, cv in enumerate(local_cols)}
        n_x = len(local_cols)

        coupling = [link for link in g.edges
                    if sg in {owner[nid] for nid in link.node_ids()}]
        z_master_cols = sorted({master_cols[(nid, var)]
                                for link in coupling
                                for nid, var, _ in link.terms
                                if owner[nid] == master_name})
        z_of = {mc: i for i, mc in enumerate(z_master_cols)}
        n_z = len(z_master_cols)

        c_fixed = np.zeros(n_x)
        lb = np.zeros(n_x)
        ub = np.zeros(n_x)
        for (nid, var), j in local_of.items():
            node = g.nodes[nid]
            k = node.var_names.index(var)
            if node.binary[k]:
                raise ShapeError(
                    f"binary variable {var!r} outside the master subgraph")
            c_fixed[j] = node.obj[k]
            lb[j] = node.lb[k]
            ub[j] = node.ub[k]

        A_rows: list[np.ndarray] = []
        C_rows: list[np.ndarray] = []
        b_vals: list[float] = []
        Aeq_rows: list[np.ndarray] = []
        Ceq_rows: list[np.ndarray] = []
        beq_vals: list[float] = []
        for nid in node_ids:
            node = g.nodes[nid]
            base = local_of[(nid, node.var_names[0])] if node.n_vars else 0
            for row, rhs in zip(node.A_ub, node.b_ub):
                full = np.zeros(n_x)
                full[base:base + node.n_vars] = row
                A_rows.append(full)
                C_rows.append(np.zeros(n_z))
                b_vals.append(rhs)
            for row, rhs in zip(node.A_eq, node.b_eq):
                full = np.zeros(n_x)
                full[base:base + node.n_vars] = row
                Aeq_rows.append(full)
                Ceq_rows.append(np.zeros(n_z))
                beq_vals.append(rhs)

        def split_link(link):
            xrow = np.zeros(n_x)
            zrow = np.zeros(n_z)
            for nid, var, coeff in link.terms:
                if owner[nid] == master_name:
                    zrow[z_of[master_cols[(nid, var)]]] += coeff
                else:
                    xrow[local_of[(nid, var)]] += coeff
            return xrow, zrow

        for link in coupling:
            xrow, zrow = split_link(link)
            if link.sense in ("<=", "=="):
                A_rows.append(xrow)
                C_rows.append(zrow)
                b_vals.append(link.rhs)
            if link.sense in (">=", "=="):
                A_rows.append(-xrow)
                C_rows.append(-zrow)
                b_vals.append(-link.rhs)

        subs.append(ScenarioSubproblemSpec(
            sub_id=sg,
            c_fixed=c_fixed, lb=lb, ub=ub,
            A=np.array(A_rows) if A_rows else np.zeros((0, n_x)),
            C=np.array(C_rows) if C_rows else np.zeros((0, n_z)),
            b_fixed=np.array(b_vals),
            A_eq=np.array(Aeq_rows) if Aeq_rows else np.zeros((0, n_x)),
            C_eq=np.array(Ceq_rows) if Ceq_rows else np.zeros((0, n_z)),
            b_eq=np.array(beq_vals),
            master_cols=tuple(z_master_cols),
            weight=g.weights.get(sg, 1.0),
            master_bounds=np.column_stack([
                master.base.lb[z_master_cols], master.base.ub[z_master_cols]])
            if n_z else None,
            var_names=tuple(f"{nid}.{var}" for nid, var in local_cols),
            scenario=g.tags.get(sg, (None, None))[0],
            period=g.tags.get(sg, (None, None))[1],
        ))

    return BendersPartition(master=master, master_cols=master_cols, subs=subs,
                            master_first_stage_cost=master.base.c.copy())
