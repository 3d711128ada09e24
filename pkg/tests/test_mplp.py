"""Parametric LP solution: region enumeration, affine maps, lookups, files."""

import io

import numpy as np
import pytest

from mpbenders.lp import DimensionMismatch, solve_lp, solve_lp_fixed
from mpbenders.mplp import (
    CriticalRegion,
    EmptySolution,
    FormatError,
    MpLp,
    NoRegionFound,
    ThetaLayout,
    embed_subproblem,
    enumerate_regions,
    evaluate_duals,
    evaluate_primal,
    evaluate_value,
    load_mp,
    locate_region,
    save_mp,
    subgradient_wrt_master,
)
from mpbenders.subproblem import ScenarioSubproblemSpec

from oracles import central_difference


def single_region_problem():
    # min x s.t. x >= theta, x <= 10, theta in [0, 1]
    return MpLp(c=[1.0], H=np.zeros((1, 1)),
                A=[[-1.0], [1.0]], b=[0.0, 10.0], F=[[-1.0], [0.0]],
                A_eq=np.zeros((0, 1)), b_eq=[], F_eq=np.zeros((0, 1)),
                A_theta=[[1.0], [-1.0]], b_theta=[1.0, 0.0])


def sign_flip_problem():
    # min theta*x, x in [0, 1], theta in [-1, 1]
    return MpLp(c=[0.0], H=[[1.0]],
                A=[[1.0], [-1.0]], b=[1.0, 0.0], F=np.zeros((2, 1)),
                A_eq=np.zeros((0, 1)), b_eq=[], F_eq=np.zeros((0, 1)),
                A_theta=[[1.0], [-1.0]], b_theta=[1.0, 1.0])


def two_var_problem():
    # min x1+x2 s.t. x1 >= t1, x2 >= t2, x1+x2 >= 1, x <= 5, Theta = [0,1]^2
    return MpLp(c=[1.0, 1.0], H=np.zeros((2, 2)),
                A=[[-1.0, 0.0], [0.0, -1.0], [-1.0, -1.0],
                   [1.0, 0.0], [0.0, 1.0]],
                b=[0.0, 0.0, -1.0, 5.0, 5.0],
                F=[[-1.0, 0.0], [0.0, -1.0], [0.0, 0.0],
                   [0.0, 0.0], [0.0, 0.0]],
                A_eq=np.zeros((0, 2)), b_eq=[], F_eq=np.zeros((0, 2)),
                A_theta=[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                b_theta=[1.0, 0.0, 1.0, 0.0])


def test_single_region():
    sol = enumerate_regions(single_region_problem())
    assert sol.n_regions == 1
    r = sol.regions[0]
    # x*(theta) = theta on the binding row, unit dual
    for t in (0.1, 0.4, 0.9):
        theta = np.array([t])
        assert evaluate_primal(r, theta)[0] == pytest.approx(t, abs=1e-9)
        assert evaluate_value(r, sol.problem, theta) == pytest.approx(t, abs=1e-9)
    lam = evaluate_duals(r, np.array([0.3]))
    assert lam[0] == pytest.approx(1.0, abs=1e-9)


def test_sign_flip_two_regions():
    sol = enumerate_regions(sign_flip_problem())
    assert sol.n_regions == 2
    # grid oracle: direct LP at 101 theta values
    p = sol.problem
    for t in np.linspace(-1.0, 1.0, 101):
        theta = np.array([t])
        ref = solve_lp(p.lp_at(theta))
        v = locate_region(sol, theta)
        val = evaluate_value(sol.regions[v], p, theta)
        assert val == pytest.approx(ref.objective, abs=1e-8)
        x = evaluate_primal(sol.regions[v], theta)
        if abs(t) > 1e-6:
            assert x[0] == pytest.approx(ref.x[0], abs=1e-7)
    # negative-theta region pushes x to 1 with value theta
    v_neg = locate_region(sol, np.array([-0.5]))
    assert evaluate_primal(sol.regions[v_neg], np.array([-0.5]))[0] == \
        pytest.approx(1.0, abs=1e-9)
    assert evaluate_value(sol.regions[v_neg], p, np.array([-0.5])) == \
        pytest.approx(-0.5, abs=1e-9)
    # hand KKT on the active row x <= 1: lambda = -theta
    lam = evaluate_duals(sol.regions[v_neg], np.array([-0.5]))
    assert lam[0] == pytest.approx(0.5, abs=1e-9)


def test_two_var_sample_point():
    sol = enumerate_regions(two_var_problem())
    theta = np.array([0.7, 0.6])
    ref = solve_lp(sol.problem.lp_at(theta))
    assert ref.objective == pytest.approx(1.3, abs=1e-9)
    v = locate_region(sol, theta)
    assert evaluate_value(sol.regions[v], sol.problem, theta) == \
        pytest.approx(1.3, abs=1e-8)
    np.testing.assert_allclose(evaluate_primal(sol.regions[v], theta),
                               [0.7, 0.6], atol=1e-7)


def test_explore_matches_enumerate():
    for prob in (single_region_problem(), sign_flip_problem(), two_var_problem()):
        by_enum = enumerate_regions(prob, strategy="enumerate")
        by_walk = enumerate_regions(prob, strategy="explore")
        rng = np.random.default_rng(1)
        lo, hi = prob.theta_box()
        for _ in range(200):
            theta = rng.uniform(lo, hi)
            va = locate_region(by_enum, theta)
            vb = locate_region(by_walk, theta)
            assert evaluate_value(by_enum.regions[va], prob, theta) == \
                pytest.approx(evaluate_value(by_walk.regions[vb], prob, theta),
                              abs=1e-7)


def test_locate_tie_break_and_membership():
    sol = enumerate_regions(sign_flip_problem())
    for v, region in enumerate(sol.regions):
        assert locate_region(sol, region.chebyshev_center) == v
    # a point on the shared facet theta = 0 belongs to the lowest index
    containing = [v for v, r in enumerate(sol.regions)
                  if r.contains(np.zeros(1))]
    assert len(containing) == 2
    assert locate_region(sol, np.zeros(1)) == min(containing)
    with pytest.raises(NoRegionFound):
        locate_region(sol, np.array([2.0]))
    with pytest.raises(DimensionMismatch):
        locate_region(sol, np.array([0.0, 0.0]))


def test_value_continuity_across_facets():
    sol = enumerate_regions(two_var_problem())
    p = sol.problem
    rng = np.random.default_rng(5)
    checked = 0
    for v, region in enumerate(sol.regions):
        for w, other in enumerate(sol.regions):
            if w <= v:
                continue
            # probe points of v's boundary that also lie in w
            for _ in range(50):
                lam = rng.uniform(size=region.E.shape[0])
                theta = region.chebyshev_center.copy()
                # push to the boundary along a random facet normal
                i = int(rng.integers(region.E.shape[0]))
                gap = region.f[i] - region.E[i] @ theta
                theta = theta + gap * region.E[i]
                if not (region.contains(theta, 1e-9) and other.contains(theta, 1e-9)):
                    continue
                va = evaluate_value(region, p, theta)
                vb = evaluate_value(other, p, theta)
                assert abs(va - vb) <= 1e-7
                checked += 1
    assert checked > 0


def test_region_kkt_at_centers():
    for prob in (single_region_problem(), sign_flip_problem(), two_var_problem()):
        sol = enumerate_regions(prob)
        for region in sol.regions:
            theta = region.chebyshev_center
            assert region.chebyshev_radius > 1e-8
            x = evaluate_primal(region, theta)
            assert np.all(prob.A @ x - prob.b - prob.F @ theta <= 1e-7)
            lam = evaluate_duals(region, theta)
            k = len(region.active_set)
            assert np.all(lam[:k] >= -1e-7)
            M = prob.A[list(region.active_set)]
            resid = prob.c + prob.H @ theta + M.T @ lam[:k]
            assert np.max(np.abs(resid)) <= 1e-7


def test_coverage_and_disjoint_interiors():
    prob = two_var_problem()
    sol = enumerate_regions(prob)
    rng = np.random.default_rng(17)
    lo, hi = prob.theta_box()
    for _ in range(500):
        theta = rng.uniform(lo, hi)
        if not solve_lp(prob.lp_at(theta)).is_optimal:
            continue
        locate_region(sol, theta)  # raises on a coverage hole
    # interior samples of one region must lie in no other region
    for v, region in enumerate(sol.regions):
        for _ in range(20):
            d = rng.normal(size=prob.theta_dim)
            d /= np.linalg.norm(d)
            theta = region.chebyshev_center + \
                0.5 * region.chebyshev_radius * d
            assert region.contains(theta, 1e-12)
            for w, other in enumerate(sol.regions):
                if w != v:
                    assert not other.contains(theta, -1e-9)


def test_oracle_equivalence_sampled():
    prob = two_var_problem()
    sol = enumerate_regions(prob)
    rng = np.random.default_rng(23)
    lo, hi = prob.theta_box()
    for _ in range(400):
        theta = rng.uniform(lo, hi)
        ref = solve_lp(prob.lp_at(theta))
        assert ref.is_optimal
        v = locate_region(sol, theta)
        region = sol.regions[v]
        val = evaluate_value(region, prob, theta)
        assert abs(val - ref.objective) <= 1e-6 * (1.0 + abs(ref.objective))
        x = evaluate_primal(region, theta)
        assert np.all(prob.A @ x - prob.b - prob.F @ theta <= 1e-6)


# ---------------------------------------------------------------------------
# subproblem embedding


def tiny_spec(n_rhs_slots: int = 1) -> ScenarioSubproblemSpec:
    # min y s.t. y >= d - z (one coupling row), y >= 0; d is a rhs slot
    rhs_slots = tuple((0, 1.0) for _ in range(n_rhs_slots))
    return ScenarioSubproblemSpec(
        sub_id="tiny",
        c_fixed=[1.0],
        lb=[0.0], ub=[np.inf],
        A=[[-1.0]], C=[[-1.0]], b_fixed=[0.0],
        A_eq=np.zeros((0, 1)), C_eq=np.zeros((0, 1)), b_eq=[],
        master_cols=(0,),
        rhs_slots=rhs_slots,
        rhs_slot_values=[2.0] * n_rhs_slots,
        master_bounds=[[0.0, 4.0]],
        rhs_bounds=[[0.0, 3.0]] * n_rhs_slots,
    )


def test_embed_dimensions():
    prob, layout = embed_subproblem(tiny_spec())
    # 1 master var + 1 random rhs -> theta_dim = 2, one unit entry in F
    assert prob.theta_dim == 2
    assert layout.master_idx == (0,)
    assert layout.rhs_idx == (1,)
    assert np.count_nonzero(prob.F) == 1
    assert prob.F[0, 1] == 1.0
    # the copy row carries the identity into the master slot
    assert prob.F_eq[-1, 0] == 1.0


def test_embed_no_random_data():
    spec = ScenarioSubproblemSpec(
        sub_id="fixed", c_fixed=[1.0], lb=[0.0], ub=[np.inf],
        A=[[-1.0]], C=[[-1.0]], b_fixed=[-1.0],
        A_eq=np.zeros((0, 1)), C_eq=np.zeros((0, 1)), b_eq=[],
        master_cols=(0,), master_bounds=[[0.0, 4.0]])
    prob, layout = embed_subproblem(spec)
    assert layout.cost_idx == ()
    assert layout.rhs_idx == ()
    assert prob.theta_dim == 1


def test_layout_partition_enforced():
    with pytest.raises(DimensionMismatch):
        ThetaLayout(master_idx=(0,), cost_idx=(0,), rhs_idx=(1,))
    with pytest.raises(DimensionMismatch):
        ThetaLayout(master_idx=(0,), cost_idx=(2,), rhs_idx=())


def test_subgradient_finite_difference_and_dual_oracle():
    spec = tiny_spec()
    prob, layout = embed_subproblem(spec)
    sol = enumerate_regions(prob)
    rng = np.random.default_rng(31)
    lo, hi = prob.theta_box()
    lp = spec.to_standard_lp()
    checked = 0
    for _ in range(120):
        theta = rng.uniform(lo + 0.05, hi - 0.05)
        v = locate_region(sol, theta)
        region = sol.regions[v]
        # finite differences only make sense away from the region boundary
        if np.max(region.E @ theta - region.f) > -5e-5:
            continue
        grad = subgradient_wrt_master(region, layout, prob, theta)

        def value_at(th):
            vv = locate_region(sol, th)
            return evaluate_value(sol.regions[vv], prob, th)

        fd = central_difference(value_at, theta)[list(layout.master_idx)]
        assert np.max(np.abs(grad - fd)) <= 1e-5

        # exact-oracle comparison through the fixing duals
        import dataclasses
        spec2 = dataclasses.replace(spec, rhs_slot_values=np.array([theta[1]]))
        lp2 = spec2.to_standard_lp()
        fixed = {spec2.n_x + i: theta[layout.master_idx[i]]
                 for i in range(spec2.n_z)}
        ref = solve_lp_fixed(lp2, fixed)
        assert ref.is_optimal
        lam = np.array([-ref.fixing_duals[spec2.n_x + i]
                        for i in range(spec2.n_z)])
        assert abs(evaluate_value(region, prob, theta) - ref.objective) <= 1e-8
        assert np.max(np.abs(grad - lam)) <= 1e-6
        checked += 1
    assert checked >= 40


def test_zero_map_region_constant():
    region = CriticalRegion(E=np.array([[1.0], [-1.0]]), f=np.array([1.0, 1.0]),
                            A_aff=np.zeros((1, 1)), b_aff=np.array([2.5]),
                            G=np.zeros((1, 1)), g=np.array([0.5]),
                            active_set=(0,),
                            chebyshev_center=np.zeros(1), chebyshev_radius=1.0)
    assert evaluate_primal(region, [0.7])[0] == 2.5
    layout = ThetaLayout(master_idx=(0,), cost_idx=(), rhs_idx=())
    prob = single_region_problem()
    assert subgradient_wrt_master(region, layout, prob, [0.7])[0] == 0.0


# ---------------------------------------------------------------------------
# serialization


def test_roundtrip_identity():
    sol = enumerate_regions(sign_flip_problem())
    buf = io.StringIO()
    save_mp(sol, buf)
    buf.seek(0)
    back = load_mp(buf)
    assert back.n_regions == sol.n_regions
    for a, b in zip(sol.regions, back.regions):
        np.testing.assert_array_equal(a.E, b.E)
        np.testing.assert_array_equal(a.f, b.f)
        np.testing.assert_array_equal(a.A_aff, b.A_aff)
        np.testing.assert_array_equal(a.b_aff, b.b_aff)
        np.testing.assert_array_equal(a.G, b.G)
        np.testing.assert_array_equal(a.g, b.g)
        assert a.active_set == b.active_set
    np.testing.assert_array_equal(sol.problem.A, back.problem.A)
    np.testing.assert_array_equal(sol.problem.H, back.problem.H)


def test_two_region_file_revalidated(tmp_path):
    sol = enumerate_regions(sign_flip_problem())
    path = tmp_path / "mp.json"
    save_mp(sol, str(path))
    back = load_mp(str(path))
    assert back.n_regions == 2
    # bit-identical rewrite
    path2 = tmp_path / "mp2.json"
    save_mp(back, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_version_mismatch_raises():
    sol = enumerate_regions(single_region_problem())
    buf = io.StringIO()
    save_mp(sol, buf)
    text = buf.getvalue().replace('"format_version":1', '"format_version":9')
    with pytest.raises(FormatError) as exc:
        load_mp(io.StringIO(text))
    assert "format_version" in str(exc.value)


def test_malformed_document_paths():
    with pytest.raises(FormatError):
        load_mp(io.StringIO("not json"))
    with pytest.raises(FormatError) as exc:
        load_mp(io.StringIO('{"format_version":1,"theta_dim":1}'))
    assert "x_dim" in str(exc.value)
    # corrupt one region matrix
    sol = enumerate_regions(single_region_problem())
    buf = io.StringIO()
    save_mp(sol, buf)
    import json as _json
    doc = _json.loads(buf.getvalue())
    doc["regions"][0]["A_aff"] = [999.0]
    with pytest.raises(FormatError) as exc:
        load_mp(io.StringIO(_json.dumps(doc)))
    assert "regions[0]" in str(exc.value)


def test_empty_solution_raised():
    # rows x <= theta and -x <= -theta - 1 conflict for every theta
    prob = MpLp(c=[1.0], H=np.zeros((1, 1)),
                A=[[1.0], [-1.0]], b=[0.0, -1.0], F=[[1.0], [-1.0]],
                A_eq=np.zeros((0, 1)), b_eq=[], F_eq=np.zeros((0, 1)),
                A_theta=[[1.0], [-1.0]], b_theta=[1.0, 0.0])
    with pytest.raises(EmptySolution):
        enumerate_regions(prob)


def test_concurrent_lookups_are_pure():
    from concurrent.futures import ThreadPoolExecutor

    prob = two_var_problem()
    sol = enumerate_regions(prob)
    rng = np.random.default_rng(4)
    lo, hi = prob.theta_box()
    thetas = [rng.uniform(lo, hi) for _ in range(400)]

    def job(theta):
        v = locate_region(sol, theta)
        return v, evaluate_value(sol.regions[v], prob, theta)

    serial = [job(t) for t in thetas]
    with ThreadPoolExecutor(max_workers=8) as pool:
        threaded = list(pool.map(job, thetas))
    assert serial == threaded


def test_duals_match_lp_at_centers():
    for prob in (single_region_problem(), sign_flip_problem(), two_var_problem()):
        sol = enumerate_regions(prob)
        for region in sol.regions:
            theta = region.chebyshev_center
            ref = solve_lp(prob.lp_at(theta))
            assert ref.is_optimal
            lam = evaluate_duals(region, theta)
            for pos, row in enumerate(region.active_set):
                assert lam[pos] == pytest.approx(ref.dual_ub[row], abs=1e-6)
