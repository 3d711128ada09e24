"""Command-line entry point.

Three subcommands tie the pipeline together:

  mpsolve   enumerate the capacity-expansion subproblem's critical
            regions once and write the mp-solution document
  benders   run Benders decomposition with either oracle and cut mode,
            writing the iteration log, trajectory table and run report
  bench     run a (horizon, scenarios, cut mode) grid with both oracles
            and emit a timing comparison table

Exit codes: 0 converged, 2 gap not closed, 3 input error, 4 numerical
failure.  All outputs are deterministic functions of the configuration;
wall-clock measurements are confined to the report's metadata block and
the timing columns of the delimited logs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from mpbenders.benders import (
    BendersConfig,
    BendersState,
    ExactOracle,
    MpOracle,
    record_trajectory,
    run,
)
from mpbenders.cep import (
    build_graph,
    build_subproblem_spec,
    default_data,
    sample_scenarios,
    scenario_slot_values,
)
from mpbenders.lp import NumericalFailure, SolverError
from mpbenders.mplp import (
    FormatError,
    MpSolution,
    ThetaLayout,
    embed_subproblem,
    enumerate_regions,
    load_mp,
    save_mp,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_GAP = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


class _CliError(Exception):
    """Input-level failure; maps to exit code 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _build_parser() -> _Parser:
    p = _Parser(prog="mpbenders", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--horizon", "-T", type=int, default=4,
                        help="planning periods (default 4)")
        sp.add_argument("--scenarios", "-K", type=int, default=10,
                        help="scenario count (default 10)")
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--tol", type=float, default=1e-6,
                        help="relative optimality gap")
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--alpha-lower-bound", type=float, default=-1e9)
        sp.add_argument("--out-dir", type=Path, default=Path("out"))
        sp.add_argument("--config", type=Path, default=None,
                        help="JSON instance config; explicit flags override it")

    sp = sub.add_parser("mpsolve", help="enumerate and save the mp solution")
    common(sp)
    sp.add_argument("--mp-file", type=Path, default=None,
                    help="output document path (default out-dir/mp_solution.json)")

    sp = sub.add_parser("benders", help="run Benders decomposition")
    common(sp)
    sp.add_argument("--cuts", choices=("multi", "single"), default="multi")
    sp.add_argument("--oracle", choices=("exact", "mp", "mp-fallback"),
                    default="exact")
    sp.add_argument("--mp-file", type=Path, default=None,
                    help="precomputed mp solution (enumerated when absent)")

    sp = sub.add_parser("bench", help="timing grid over both oracles")
    common(sp)
    sp.add_argument("--cuts", default="multi,single",
                    help="comma list of cut modes")
    sp.add_argument("--grid-scenarios", default=None,
                    help="comma list of K values (default: --scenarios)")
    return p


_CONFIG_KEYS = {
    "T": "horizon", "K": "scenarios", "seed": "seed",
    "cut_mode": "cuts", "oracle_mode": "oracle", "tol": "tol",
    "max_iter": "max_iter", "alpha_lower_bound": "alpha_lower_bound",
}


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill settings from a JSON config; explicit flags keep priority."""
    if args.config is None:
        return
    try:
        doc = json.loads(Path(args.config).read_text())
    except FileNotFoundError as exc:
        raise _CliError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise _CliError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise _CliError("config must be a JSON object")
    given = {a.split("=")[0] for a in argv if a.startswith("-")}
    aliases = {"horizon": ("-T",), "scenarios": ("-K",)}
    for key, attr in _CONFIG_KEYS.items():
        if key not in doc or not hasattr(args, attr):
            continue
        flags = ("--" + attr.replace("_", "-"),) + aliases.get(attr, ())
        if any(f in given for f in flags):
            continue
        setattr(args, attr, doc[key])
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        raise _CliError(f"unknown config keys: {sorted(unknown)}")


def _cep_layout(T: int) -> ThetaLayout:
    _, layout = embed_subproblem(build_subproblem_spec(default_data(T), 0, 1))
    return layout


def _enumerate_cep(T: int) -> tuple[MpSolution, ThetaLayout, float]:
    spec = build_subproblem_spec(default_data(T), 0, 1)
    problem, layout = embed_subproblem(spec)
    t0 = time.perf_counter()
    solution = enumerate_regions(problem)
    return solution, layout, time.perf_counter() - t0


def _write_iteration_log(state: BendersState, path: Path) -> None:
    lines = ["iter,LB,UB,rel_gap,master_time_s,sub_time_s,cuts_added"]
    for r in state.log:
        lines.append(",".join([
            str(r.iteration), _fmt(r.lb), _fmt(r.ub), _fmt(r.rel_gap),
            f"{r.master_time:.6f}", f"{r.sub_time:.6f}", str(r.cuts_added)]))
    path.write_text("\n".join(lines) + "\n")


def _write_trajectory(state: BendersState, path: Path) -> None:
    lines = ["iter,scenario,period,region_id"]
    for it, scenario, period, region_id in record_trajectory(state):
        lines.append(",".join([
            str(it), str(scenario), "" if period is None else str(period),
            "" if region_id is None else str(region_id)]))
    path.write_text("\n".join(lines) + "\n")


def _run_benders(args, cut_mode: str, oracle_mode: str,
                 mp_file: Path | None):
    data = default_data(args.horizon)
    scenarios = sample_scenarios(data, args.scenarios, args.seed)
    graph = build_graph(data, scenarios)
    cfg = BendersConfig(cut_mode=cut_mode, oracle_mode=oracle_mode,
                        tol=args.tol, max_iter=args.max_iter,
                        alpha_lower_bound=args.alpha_lower_bound,
                        probabilities=scenarios.probabilities)
    enum_time = 0.0
    mp_solution = None
    if oracle_mode == "exact":
        oracle = ExactOracle()
    else:
        if mp_file is not None and mp_file.exists():
            mp_solution = load_mp(str(mp_file))
            layout = _cep_layout(args.horizon)
            if layout.theta_dim != mp_solution.theta_dim:
                raise _CliError(
                    f"mp file has theta_dim {mp_solution.theta_dim}, "
                    f"expected {layout.theta_dim}")
        else:
            mp_solution, layout, enum_time = _enumerate_cep(args.horizon)
        oracle = MpOracle(mp_solution, layout,
                          fallback=oracle_mode == "mp-fallback",
                          scenario_data=scenario_slot_values(data, scenarios))
    t0 = time.perf_counter()
    state = run(graph, cfg, oracle)
    total = time.perf_counter() - t0
    return state, cfg, enum_time, total, mp_solution


def cmd_mpsolve(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    solution, _, enum_time = _enumerate_cep(args.horizon)
    target = args.mp_file or (args.out_dir / "mp_solution.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_mp(solution, str(target))
    print(f"critical regions: {solution.n_regions}")
    print(f"enumeration time: {enum_time:.3f} s")
    print(f"written: {target}")
    return EXIT_OK


def cmd_benders(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    state, cfg, enum_time, total, _ = _run_benders(
        args, args.cuts, args.oracle, args.mp_file)
    log_path = args.out_dir / "iterations.csv"
    traj_path = args.out_dir / "trajectory.csv"
    _write_iteration_log(state, log_path)
    _write_trajectory(state, traj_path)
    sub_time = sum(r.sub_time for r in state.log)
    master_time = sum(r.master_time for r in state.log)
    evals = sum(len(r.regions) for r in state.log)
    report = {
        "config": {
            "T": args.horizon, "K": args.scenarios, "seed": args.seed,
            "cut_mode": cfg.cut_mode, "oracle_mode": cfg.oracle_mode,
            "tol": cfg.tol, "max_iter": cfg.max_iter,
            "alpha_lower_bound": cfg.alpha_lower_bound,
        },
        "converged": state.converged,
        "objective": state.objective if state.converged else None,
        "iterations": state.iteration,
        "final_lb": state.lb,
        "final_ub": state.ub,
        "relative_gap": state.rel_gap(),
        "files": {"iteration_log": str(log_path),
                  "trajectory": str(traj_path)},
        "metadata": {
            "created_at": datetime.now(timezone.utc).isoformat(),
            "timings": {
                "total_s": total,
                "master_s": master_time,
                "subproblem_s": sub_time,
                "enumeration_s": enum_time,
                "sub_eval_count": evals,
                "mean_sub_eval_s": sub_time / evals if evals else 0.0,
            },
        },
    }
    (args.out_dir / "run_report.json").write_text(
        json.dumps(report, indent=2) + "\n")
    gap = state.rel_gap()
    print(f"converged: {state.converged}  iterations: {state.iteration}  "
          f"gap: {gap:.3e}")
    if state.converged:
        print(f"objective: {state.objective:.10g}")
    return EXIT_OK if state.converged else EXIT_GAP


def cmd_bench(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ks = [int(v) for v in
          (args.grid_scenarios or str(args.scenarios)).split(",")]
    cut_modes = [c.strip() for c in args.cuts.split(",") if c.strip()]
    for c in cut_modes:
        if c not in ("multi", "single"):
            raise _CliError(f"unknown cut mode {c!r}")
    header = ("T,K,cuts,oracle,converged,objective,iterations,"
              "sub_evals,enum_time_s,sub_time_s,mean_eval_s,"
              "amortized_sub_time_s,master_time_s,total_s")
    rows = [header]
    for K in ks:
        for cut_mode in cut_modes:
            for oracle_mode in ("exact", "mp"):
                sub_args = argparse.Namespace(**vars(args))
                sub_args.scenarios = K
                state, cfg, enum_time, total, _ = _run_benders(
                    sub_args, cut_mode, oracle_mode, None)
                sub_time = sum(r.sub_time for r in state.log)
                master_time = sum(r.master_time for r in state.log)
                evals = sum(len(r.regions) for r in state.log)
                rows.append(",".join([
                    str(args.horizon), str(K), cut_mode, oracle_mode,
                    str(int(state.converged)),
                    _fmt(state.ub), str(state.iteration), str(evals),
                    f"{enum_time:.6f}", f"{sub_time:.6f}",
                    f"{sub_time / evals if evals else 0.0:.9f}",
                    f"{enum_time + sub_time:.6f}",
                    f"{master_time:.6f}", f"{total:.6f}"]))
                print(rows[-1])
    (args.out_dir / "bench.csv").write_text("\n".join(rows) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, argv)
        if args.horizon < 1 or args.scenarios < 1:
            raise _CliError("horizon and scenarios must be positive")
        if args.command == "mpsolve":
            return cmd_mpsolve(args)
        if args.command == "benders":
            return cmd_benders(args)
        return cmd_bench(args)
    except (_CliError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
