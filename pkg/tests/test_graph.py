"""Graph container: assembly, determinism, Benders partition."""

import numpy as np
import pytest

from mpbenders.graph import (
    LinkConstraint,
    ModelGraph,
    ModelNode,
    ShapeError,
    assemble_monolithic,
    extract_benders_partition,
)
from mpbenders.lp import solve_lp
from mpbenders.milp import solve_milp


def two_node_graph(linked: bool) -> ModelGraph:
    g = ModelGraph()
    a = ModelNode("a")
    a.add_var("x", lb=0.0, ub=4.0, cost=1.0)
    a.add_ineq({"x": -1.0}, -1.0)  # x >= 1
    b = ModelNode("b")
    b.add_var("y", lb=0.0, ub=4.0, cost=2.0)
    b.add_ineq({"y": -1.0}, -0.5)  # y >= 0.5
    g.add_node(a)
    g.add_node(b)
    g.add_subgraph("m", ["a"])
    g.add_subgraph("s", ["b"])
    if linked:
        g.add_edge(LinkConstraint("l0", (("a", "x", 1.0), ("b", "y", 1.0)),
                                  ">=", 3.0))
    return g


def test_block_diagonal_assembly():
    g = two_node_graph(linked=False)
    p, col_of = assemble_monolithic(g)
    assert p.base.n_vars == 2
    # local rows do not couple across the blocks
    for row in p.base.A_ub:
        assert np.count_nonzero(row) == 1
    sol = solve_lp(p.base)
    # separable: x=1 cost 1, y=0.5 cost 1
    assert sol.objective == pytest.approx(2.0, abs=1e-9)


def test_linked_matches_hand_reduction():
    g = two_node_graph(linked=True)
    p, _ = assemble_monolithic(g)
    sol = solve_lp(p.base)
    # by hand: min x + 2y, x+y >= 3, x >= 1, y >= 0.5, x,y <= 4
    # push x up first (cheaper): x = min(4, 3 - 0.5) = 2.5, y = 0.5 -> 3.5
    assert sol.objective == pytest.approx(3.5, abs=1e-8)


def test_assembly_deterministic():
    g1 = two_node_graph(linked=True)
    g2 = two_node_graph(linked=True)
    p1, c1 = assemble_monolithic(g1)
    p2, c2 = assemble_monolithic(g2)
    assert c1 == c2
    np.testing.assert_array_equal(p1.base.A_ub, p2.base.A_ub)
    np.testing.assert_array_equal(p1.base.c, p2.base.c)


def test_weighted_subgraph_objective():
    g = two_node_graph(linked=False)
    g.weights["s"] = 0.25
    p, col_of = assemble_monolithic(g)
    assert p.base.c[col_of[("b", "y")]] == pytest.approx(0.5)


def test_link_requires_two_nodes():
    with pytest.raises(ShapeError):
        LinkConstraint("bad", (("a", "x", 1.0), ("a", "y", 1.0)), "<=", 0.0)


def test_partition_roundtrip_bijection():
    g = two_node_graph(linked=True)
    g.set_master("m")
    part = extract_benders_partition(g)
    assert len(part.subs) == 1
    spec = part.subs[0]
    assert spec.sub_id == "s"
    # one copy slot bound to the master x column
    assert spec.n_z == 1
    assert spec.master_cols == (part.master_cols[("a", "x")],)
    # coupling row rewritten over (y, z): -y - z <= -3
    assert spec.A.shape[0] == 2  # local row + coupling row
    np.testing.assert_allclose(spec.A[1], [-1.0])
    np.testing.assert_allclose(spec.C[1], [-1.0])
    assert spec.b_fixed[1] == pytest.approx(-3.0)


def test_master_solo_graph_has_no_subs():
    g = ModelGraph()
    n = ModelNode("only")
    n.add_var("x", lb=0.0, ub=1.0, cost=-1.0)
    g.add_node(n)
    g.add_subgraph("m", ["only"])
    g.set_master("m")
    part = extract_benders_partition(g)
    assert part.subs == []
    sol = solve_milp(part.master)
    assert sol.objective == pytest.approx(-1.0)


def test_edge_between_two_satellites_rejected():
    g = two_node_graph(linked=False)
    c = ModelNode("c")
    c.add_var("w", lb=0.0, ub=1.0)
    g.add_node(c)
    g.add_subgraph("s2", ["c"])
    g.add_edge(LinkConstraint("bad", (("b", "y", 1.0), ("c", "w", 1.0)),
                              "<=", 1.0))
    g.set_master("m")
    with pytest.raises(ShapeError):
        extract_benders_partition(g)


def test_intra_master_edges_allowed():
    g = ModelGraph()
    a = ModelNode("m1")
    a.add_var("x", lb=0.0, ub=2.0, cost=1.0)
    b = ModelNode("m2")
    b.add_var("x", lb=0.0, ub=2.0, cost=1.0)
    s = ModelNode("s1")
    s.add_var("y", lb=0.0, ub=2.0, cost=1.0)
    for n in (a, b, s):
        g.add_node(n)
    g.add_subgraph("master", ["m1", "m2"])
    g.add_subgraph("sat", ["s1"])
    g.add_edge(LinkConstraint("chain", (("m1", "x", 1.0), ("m2", "x", -1.0)),
                              "==", 0.0))
    g.add_edge(LinkConstraint("cup", (("m2", "x", -1.0), ("s1", "y", 1.0)),
                              "<=", 0.0))
    g.set_master("master")
    part = extract_benders_partition(g)
    # the chain equality became a <= pair inside the master
    assert part.master.base.A_ub.shape[0] == 2
    assert len(part.subs) == 1


def test_nodes_outside_subgraphs_rejected():
    g = two_node_graph(linked=False)
    g.add_node(ModelNode("stray"))
    with pytest.raises(ShapeError):
        assemble_monolithic(g)
