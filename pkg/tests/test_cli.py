"""Command-line pipeline: files, exit codes, determinism."""

import json

from mpbenders.cli import main
from mpbenders.mplp import load_mp


def _strip_times(csv_text: str) -> str:
    """Iteration log minus the wall-clock columns (4 and 5)."""
    out = []
    for line in csv_text.strip().splitlines():
        cells = line.split(",")
        out.append(",".join(cells[:4] + cells[6:]))
    return "\n".join(out)


def test_mpsolve_roundtrip(tmp_path, capsys):
    mp_file = tmp_path / "mp.json"
    rc = main(["mpsolve", "--horizon", "2", "--out-dir", str(tmp_path),
               "--mp-file", str(mp_file)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "critical regions:" in out
    sol = load_mp(str(mp_file))
    assert sol.n_regions >= 1


def test_mpsolve_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    for f in (a, b):
        assert main(["mpsolve", "--horizon", "2", "--out-dir", str(tmp_path),
                     "--mp-file", str(f)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_benders_exact_small(tmp_path):
    out = tmp_path / "run"
    rc = main(["benders", "--horizon", "2", "--scenarios", "3", "--seed", "1",
               "--cuts", "multi", "--oracle", "exact", "--out-dir", str(out)])
    assert rc == 0
    report = json.loads((out / "run_report.json").read_text())
    assert report["converged"] is True
    assert report["objective"] is not None
    log = (out / "iterations.csv").read_text().strip().splitlines()
    assert log[0].startswith("iter,LB,UB,rel_gap")
    assert len(log) == report["iterations"] + 1
    traj = (out / "trajectory.csv").read_text().strip().splitlines()
    assert traj[0] == "iter,scenario,period,region_id"
    # exact oracle leaves the region column empty
    assert traj[1].endswith(",")


def test_benders_mp_matches_exact(tmp_path):
    out_a = tmp_path / "exact"
    out_b = tmp_path / "mp"
    assert main(["benders", "--horizon", "2", "--scenarios", "3",
                 "--oracle", "exact", "--out-dir", str(out_a)]) == 0
    assert main(["benders", "--horizon", "2", "--scenarios", "3",
                 "--oracle", "mp", "--out-dir", str(out_b)]) == 0
    obj_a = json.loads((out_a / "run_report.json").read_text())["objective"]
    obj_b = json.loads((out_b / "run_report.json").read_text())["objective"]
    assert abs(obj_a - obj_b) <= 1e-6 * (1.0 + abs(obj_a))
    traj = (out_b / "trajectory.csv").read_text().strip().splitlines()
    assert all(line.split(",")[3] != "" for line in traj[1:])


def test_benders_with_mp_file(tmp_path):
    mp_file = tmp_path / "mp.json"
    assert main(["mpsolve", "--horizon", "2", "--mp-file", str(mp_file),
                 "--out-dir", str(tmp_path)]) == 0
    out = tmp_path / "run"
    rc = main(["benders", "--horizon", "2", "--scenarios", "3",
               "--oracle", "mp", "--mp-file", str(mp_file),
               "--out-dir", str(out)])
    assert rc == 0
    report = json.loads((out / "run_report.json").read_text())
    assert report["metadata"]["timings"]["enumeration_s"] == 0.0


def test_max_iter_one_exits_gap_not_closed(tmp_path):
    out = tmp_path / "run"
    rc = main(["benders", "--horizon", "2", "--scenarios", "3",
               "--max-iter", "1", "--out-dir", str(out)])
    assert rc == 2
    log = (out / "iterations.csv").read_text().strip().splitlines()
    assert len(log) == 2  # header + the single iteration
    report = json.loads((out / "run_report.json").read_text())
    assert report["converged"] is False
    assert report["objective"] is None


def test_determinism_replay(tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["benders", "--horizon", "2", "--scenarios", "4",
                     "--seed", "3", "--oracle", "mp",
                     "--out-dir", str(out)]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert _strip_times((a / "iterations.csv").read_text()) == \
        _strip_times((b / "iterations.csv").read_text())


def test_config_file_and_flag_priority(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "T": 2, "K": 3, "seed": 5, "cut_mode": "single",
        "oracle_mode": "exact", "tol": 1e-6, "max_iter": 400,
        "alpha_lower_bound": -1e9}))
    out = tmp_path / "run"
    rc = main(["benders", "--config", str(cfg), "--out-dir", str(out),
               "--scenarios", "2"])
    assert rc == 0
    report = json.loads((out / "run_report.json").read_text())
    assert report["config"]["T"] == 2
    assert report["config"]["K"] == 2  # flag beats config
    assert report["config"]["cut_mode"] == "single"
    assert report["config"]["seed"] == 5


def test_input_errors_exit_3(tmp_path):
    assert main(["benders", "--horizon", "0"]) == 3
    assert main(["benders", "--config", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{\"unknown_key\": 1}")
    assert main(["benders", "--config", str(bad)]) == 3
    nonsense = tmp_path / "broken_mp.json"
    nonsense.write_text("{}")
    assert main(["benders", "--oracle", "mp", "--mp-file", str(nonsense),
                 "--horizon", "2", "--scenarios", "2",
                 "--out-dir", str(tmp_path / "x")]) == 3
    assert main(["unknown-command"]) == 3


def test_bench_grid(tmp_path):
    out = tmp_path / "bench"
    rc = main(["bench", "--horizon", "2", "--grid-scenarios", "2,3",
               "--cuts", "multi,single", "--seed", "1", "--out-dir", str(out)])
    assert rc == 0
    rows = (out / "bench.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 2 * 2 * 2  # header + K x cuts x oracle
    header = rows[0].split(",")
    i_obj = header.index("objective")
    i_k = header.index("K")
    # identical (T, K, seed) cells agree on the objective
    by_cell = {}
    for row in rows[1:]:
        cells = row.split(",")
        by_cell.setdefault(cells[i_k], []).append(float(cells[i_obj]))
    for objs in by_cell.values():
        assert max(objs) - min(objs) <= 1e-6 * (1.0 + abs(objs[0]))
