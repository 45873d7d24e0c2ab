import json
import math
import os

import numpy as np
import pytest

from cpnest.accel import (ALS, NESTEROV_DIRECT, NESTEROV_LS, NESTEROV_RESTARTED, MomentumRule, RestartRule,
                          RunTrace, SolverConfig, TraceRecord)
from cpnest.harness import cli
from cpnest.harness.plots import curve_data, emit_convergence_curve
from cpnest.harness.profile import cost_table, default_taus, profile_from_costs, tau_profile
from cpnest.harness.runner import ExperimentPlan, config_to_json, load_plan, plan_from_dict, run_one, run_plan
from cpnest.harness.traces import TraceFormatError, read_trace, read_trace_dir, trace_to_text, write_trace
from cpnest.naming import SolverNameError, format_solver_name, parse_solver_name
from cpnest.problems import SyntheticSpec, make_synthetic, save_tensor

INF = math.inf
COSTS = {
    "P1": {"A": 10, "B": 20, "C": 40},
    "P2": {"A": 30, "B": 15, "C": INF},
    "P3": {"A": INF, "B": INF, "C": 5},
    "P4": {"A": 8, "B": 12, "C": 8},
}
# worked out by hand from COSTS
EXPECTED = {
    1.0: (0.5, 0.25, 0.5),
    1.5: (0.5, 0.5, 0.5),
    2.0: (0.75, 0.75, 0.5),
    4.0: (0.75, 0.75, 0.75),
    16.0: (0.75, 0.75, 0.75),
}


def fake_trace(problem, solver, cost, converged=True):
    rec = TraceRecord(k=1, f=1.0, grad_norm=0.0, delta_x_norm=0.0, beta_used=0.0, restarted=False,
                      n_f_evals=0, n_g_evals=1, n_als_sweeps=0, wall_seconds=cost / 100,
                      sweep_equivalents=cost)
    return RunTrace(solver=solver, problem=problem, n_x=10, status="converged" if converged else "stalled",
                    records=[rec])


# tau profiles

def test_profile_hand_table():
    taus = sorted(EXPECTED)
    prof = profile_from_costs(COSTS, taus=taus)
    prof.check()
    assert prof.solvers == ["A", "B", "C"] and prof.n_problems == 4
    for j, tau in enumerate(taus):
        assert tuple(prof.fractions[s][j] for s in "ABC") == EXPECTED[tau]
    assert prof.solve_rate("A") == 0.75


def test_profile_two_solvers():
    prof = profile_from_costs({"p": {"x": 10, "y": 20}}, taus=[1, 1.99, 2, 3])
    assert prof.fractions["x"].tolist() == [1, 1, 1, 1]
    assert prof.fractions["y"].tolist() == [0, 0, 1, 1]


def test_profile_unsolved_policy():
    costs = dict(COSTS, P5={"A": INF, "B": INF, "C": INF})
    counted = profile_from_costs(costs, taus=[16.0])
    dropped = profile_from_costs(costs, taus=[16.0], unsolved="drop")
    assert counted.n_problems == 5 and dropped.n_problems == 4
    assert counted.fractions["A"][0] == 0.6
    assert dropped.fractions["A"][0] == 0.75
    with pytest.raises(ValueError):
        profile_from_costs(costs, unsolved="ignore")
    with pytest.raises(ValueError):
        profile_from_costs({})


def test_profile_from_traces_matches_table(tmp_path):
    traces = [fake_trace(p, s, c, math.isfinite(c)) for p, per in COSTS.items() for s, c in per.items()]
    table = cost_table(traces)
    assert table["P2"]["C"] == INF and table["P4"]["B"] == 12
    prof = tau_profile(traces, taus=sorted(EXPECTED))
    for j, tau in enumerate(sorted(EXPECTED)):
        assert tuple(prof.fractions[s][j] for s in "ABC") == EXPECTED[tau]
    prof.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "tau,A,B,C" and len(lines) == 1 + len(EXPECTED)


def test_default_taus():
    taus = default_taus()
    assert taus[0] == 1.0 and taus[-1] == pytest.approx(16.0) and len(taus) == 200
    assert np.all(np.diff(taus) > 0)


# traces

@pytest.fixture(scope="module")
def real_trace():
    p = make_synthetic(SyntheticSpec(s=8, c=0.9, R=2, l1=1, l2=1, seed=2))
    from cpnest.accel import solve
    _, tr = solve(p.tensor, p.x0, SolverConfig(max_sweeps=200), rank=2)
    tr.problem = "demo"
    tr.meta["seed"] = "2"
    return tr


def test_trace_roundtrip(tmp_path, real_trace):
    path = tmp_path / "a.trace"
    write_trace(real_trace, path)
    back = read_trace(path)
    assert back.checksum() == real_trace.checksum()
    assert back.records == real_trace.records
    assert back.meta["seed"] == "2" and back.meta["version"].startswith("cpnest ")
    assert trace_to_text(back).splitlines()[1:6] == trace_to_text(real_trace).splitlines()[1:6]
    assert not os.path.exists(f"{path}.part")


def test_trace_format_errors(tmp_path):
    bad = tmp_path / "bad.trace"
    bad.write_text("hello\n")
    with pytest.raises(TraceFormatError):
        read_trace(bad)
    bad.write_text("# cpnest-trace v1\n# solver=x\nk,f\n")
    with pytest.raises(TraceFormatError):
        read_trace(bad)


def test_convergence_curve(tmp_path, real_trace):
    out = emit_convergence_curve(real_trace, str(tmp_path / "curve"))
    data = np.loadtxt(out.data_path)
    assert data.shape == (len(real_trace), 2)
    assert np.allclose(data, curve_data(real_trace))
    assert open(out.plot_path).read().lstrip().startswith("<?xml")
    flags = real_trace.column("restarted")
    assert np.array_equal(out.restart_costs, real_trace.column("sweep_equivalents")[flags])


# names

@pytest.mark.parametrize("name", ["ALS", "GD", "Nesterov-GD", "Nesterov-ALS", "Nesterov-ALS-LS",
                                  "Nesterov-ALS-RF-SG", "Nesterov-ALS-RX-S1-D3-E", "Nesterov-ALS-SN",
                                  "Nesterov-ALS-RG-SN-E"])
def test_name_roundtrip(name):
    assert format_solver_name(parse_solver_name(name)) == name


def test_name_parsing():
    cfg = parse_solver_name("nesterov-als-e-sg-d2-rf", tol=1e-7)
    assert cfg.variant == NESTEROV_RESTARTED and cfg.tol == 1e-7
    assert cfg.restart == RestartRule("RF", d=2, eta_mode="scheduled")
    assert cfg.momentum == MomentumRule("SG")
    assert parse_solver_name("Nesterov-ALS").variant == NESTEROV_DIRECT
    assert parse_solver_name("ALS").variant == ALS
    assert parse_solver_name("Nesterov-ALS-LS").variant == NESTEROV_LS
    for bad in ("Nesterov-ALS-RF", "Nesterov-ALS-SN-E", "Nesterov-ALS-RF-SG-D1", "Nesterov-ALS-RF-RG-SG",
                "Newton", "Nesterov-ALS-RF-SG-Q"):
        with pytest.raises(SolverNameError):
            parse_solver_name(bad)


# runner

def test_plan_parsing(tmp_path):
    save_tensor(np.ones((3, 4, 5)), tmp_path / "ones.tensor")
    (tmp_path / "plan.json").write_text(json.dumps({
        "output_dir": "out", "tol": 1e-6, "max_sweeps": 50,
        "problems": [{"s": 6, "c": 0.5, "R": 2, "seed": 1, "name": "syn"},
                     {"file": "ones.tensor", "rank": 1}],
        "solvers": ["ALS", {"name": "Nesterov-ALS-RF-SG", "label": "mine", "max_weight": 1.0,
                            "eta0": 1.3, "ls_max_iters": 7}],
    }))
    plan = load_plan(tmp_path / "plan.json")
    assert plan.output_dir == str(tmp_path / "out")
    assert [n for n, _ in plan.solvers] == ["ALS", "mine"]
    assert all(cfg.max_sweeps == 50 for _, cfg in plan.solvers)
    assert plan.problems[1].file == str(tmp_path / "ones.tensor")
    mine = plan.solvers[1][1]
    assert (mine.momentum.max_weight, mine.restart.eta0, mine.ls.max_iters) == (1.0, 1.3, 7)
    assert json.loads(config_to_json(plan.solvers[0][1]))["max_seconds"] is None
    with pytest.raises(ValueError):
        plan_from_dict({"problems": [], "solvers": [{"name": "ALS", "speed": 2}]})
    with pytest.raises(ValueError):
        plan_from_dict({"problems": [], "solvers": [], "bogus": 1})
    with pytest.raises(ValueError):
        plan_from_dict({"problems": [], "solvers": ["ALS", "als"]})
    suite = plan_from_dict({"problems": {"suite": {"instances": 2, "classes": [1]}}, "solvers": ["ALS"]})
    assert [p.name for p in suite.problems] == ["class1-inst0", "class1-inst1"]


def small_plan(tmp_path, workers=1):
    problems = [SyntheticSpec(s=6, c=0.5, R=2, l1=1, l2=1, seed=i, name=f"p{i}") for i in (1, 2)]
    solvers = [(n, parse_solver_name(n, max_sweeps=300)) for n in ("ALS", "Nesterov-ALS-RF-SG")]
    return ExperimentPlan(problems=problems, solvers=solvers, tol=1e-8, workers=workers,
                          output_dir=str(tmp_path))


def test_run_plan_serial_and_parallel(tmp_path):
    serial = run_plan(small_plan(tmp_path / "a"))
    parallel = run_plan(small_plan(tmp_path / "b", workers=2))
    assert [t.checksum() for t in serial] == [t.checksum() for t in parallel]
    assert len(os.listdir(tmp_path / "a")) == 4
    back = read_trace_dir(tmp_path / "a")
    assert sorted(t.checksum() for t in back) == sorted(t.checksum() for t in serial)
    meta = back[0].meta
    assert json.loads(meta["problem_ref"])["seed"] in (0, 1)
    assert json.loads(meta["config"])["tol"] == 1e-8


def test_run_one_failure_and_relative_tol(tmp_path):
    bad = run_one(SyntheticSpec(s=6, c=0.5, R=2), "x", SolverConfig(variant=ALS), 1e-9, "absolute", 0)
    assert bad.status == "converged"
    from cpnest.harness.runner import FileProblem
    missing = run_one(FileProblem(file=str(tmp_path / "nope.tensor"), rank=2), "ALS",
                      SolverConfig(variant=ALS), 1e-9, "absolute", 0)
    assert missing.status.startswith("failed: ")
    rel = run_one(SyntheticSpec(s=6, c=0.5, R=2), "ALS", SolverConfig(variant=ALS), 1e-3, "relative", 0)
    first = rel.records[0]
    assert rel.tol == pytest.approx(1e-3 * first.grad_norm)


# command line

def test_cli_end_to_end(tmp_path, capsys):
    suite = tmp_path / "suite"
    assert cli.main(["gen", "--out", str(suite), "--instances", "1", "--classes", "1"]) == 0
    tensor = suite / "class1-inst0.tensor"
    assert tensor.exists()
    runs = tmp_path / "runs"
    for solver in ("ALS", "Nesterov-ALS-RF-SG"):
        assert cli.main(["decompose", str(tensor), "--rank", "3", "--solver", solver, "--out", str(runs),
                         "--max-sweeps", "200", "--tol", "1e-6"]) == 0
    assert cli.main(["profile", str(runs)]) == 0
    assert (runs / "profile_sweep_equivalents.csv").exists()
    traces = sorted(str(p) for p in runs.glob("*.trace"))
    assert cli.main(["curve", *traces, "--out", str(tmp_path / "curves"), "--combined", "all.svg"]) == 0
    assert (tmp_path / "curves" / "all.svg").exists()
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"output_dir": "bench", "max_sweeps": 100,
                                "problems": [{"file": str(tensor), "rank": 3}], "solvers": ["ALS"]}))
    assert cli.main(["bench", str(plan)]) == 0
    assert len(list((tmp_path / "bench").glob("*.trace"))) == 1
    out = capsys.readouterr().out
    assert "wrote 1 problems" in out and "1 runs" in out


def test_cli_overrides_and_errors(tmp_path, capsys):
    args = cli.build_parser().parse_args(["decompose", "x.tensor", "--rank", "2", "--solver", "Nesterov-ALS-RF-SG",
                                          "--restart", "RX", "--delay", "3", "--ls-max-iters", "5"])
    cfg = cli.config_from_args(args)
    assert cfg.restart.kind == "RX" and cfg.restart.d == 3 and cfg.ls.max_iters == 5
    assert cfg.momentum.max_weight == math.inf
    args = cli.build_parser().parse_args(["decompose", "x.tensor", "--rank", "2", "--max-weight", "1"])
    assert cli.config_from_args(args).momentum.max_weight == 1.0
    assert cli.main(["decompose", str(tmp_path / "missing.tensor"), "--rank", "2"]) == 2
    assert cli.main(["decompose", str(tmp_path / "missing.tensor"), "--rank", "2", "--solver", "Foo"]) == 2
    assert "error" in capsys.readouterr().err
