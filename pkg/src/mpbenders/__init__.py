"""Benders decomposition over graph-structured programs with exact
multi-parametric LP surrogates for scenario subproblems."""

from mpbenders.lp import (
    StandardLp,
    LpSolution,
    SolverError,
    DimensionMismatch,
    NumericalFailure,
    solve_lp,
    solve_lp_fixed,
)
from mpbenders.milp import MixedBinaryLp, MilpSolution, solve_milp
from mpbenders.mplp import (
    MpLp,
    CriticalRegion,
    MpSolution,
    ThetaLayout,
    EmptySolution,
    NoRegionFound,
    FormatError,
    embed_subproblem,
    enumerate_regions,
    locate_region,
    evaluate_primal,
    evaluate_value,
    evaluate_duals,
    subgradient_wrt_master,
    save_mp,
    load_mp,
)
from mpbenders.subproblem import ScenarioSubproblemSpec
from mpbenders.graph import (
    ModelNode,
    LinkConstraint,
    ModelGraph,
    ShapeError,
    BendersPartition,
    assemble_monolithic,
    extract_benders_partition,
)
from mpbenders.benders import (
    Cut,
    SubproblemOracle,
    ExactOracle,
    MpOracle,
    BendersConfig,
    BendersState,
    MasterInfeasible,
    OracleFailure,
    build_master_with_cuts,
    run,
    record_trajectory,
)

__all__ = [
    "StandardLp", "LpSolution", "SolverError", "DimensionMismatch",
    "NumericalFailure", "solve_lp", "solve_lp_fixed",
    "MixedBinaryLp", "MilpSolution", "solve_milp",
    "MpLp", "CriticalRegion", "MpSolution", "ThetaLayout",
    "EmptySolution", "NoRegionFound", "FormatError",
    "embed_subproblem", "enumerate_regions", "locate_region",
    "evaluate_primal", "evaluate_value", "evaluate_duals",
    "subgradient_wrt_master", "save_mp", "load_mp",
    "ScenarioSubproblemSpec",
    "ModelNode", "LinkConstraint", "ModelGraph", "ShapeError",
    "BendersPartition", "assemble_monolithic", "extract_benders_partition",
    "Cut", "SubproblemOracle", "ExactOracle", "MpOracle",
    "BendersConfig", "BendersState", "MasterInfeasible", "OracleFailure",
    "build_master_with_cuts", "run", "record_trajectory",
]

__version__ = "0.1.0"
