"""Experiment plans: every (problem, solver, repetition) run, one trace file each.

Plan files are JSON objects::

    {
      "output_dir": "runs/collinear",     # trace directory (created if missing)
      "workers": 1,                        # process pool size
      "repetitions": 1,
      "tol": 1e-9,
      "tol_mode": "absolute",              # or "relative": tol * ||grad f(x0)||
      "max_sweeps": 5000,                  # optional, applied to every solver
      "max_seconds": 600,                  # optional
      "problems": [ ... ] | {"suite": {"instances": 10, "base_seed": 0, "classes": [1, 3]}},
      "solvers": ["ALS", "Nesterov-ALS-RF-SG", {"name": "Nesterov-ALS-LS", "max_sweeps": 8000}]
    }

A solver entry is a name or an object with ``name`` plus optional ``label``,
``max_sweeps``, ``max_seconds``, momentum fields ``skip_duplicates``
and ``max_weight``, eta fields ``eta0``, ``eta_min``, ``eta_decrement``, and
line-search fields prefixed ``ls_`` (``ls_c_curv``, ``ls_max_iters``, ...).

A problem entry is either a synthetic spec
``{"s": 50, "c": 0.9, "R": 3, "l1": 1, "l2": 1, "seed": 7, "name": "..."}`` or a
tensor file ``{"file": "data.tensor", "rank": 3, "seed": 0, "name": "..."}``.
Relative ``file`` paths are resolved against the plan file's directory.
"""
from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..accel import RunTrace, SolverConfig, solve
from ..cp_kernel import gradient, unpack
from ..naming import format_solver_name, parse_solver_name
from ..problems import SyntheticSpec, load_problem, make_synthetic, standard_suite
from .traces import write_trace


@dataclass(frozen=True)
class FileProblem:
    file: str
    rank: int
    seed: int = 0
    name: str = ""


@dataclass
class ExperimentPlan:
    problems: list
    solvers: list  # (name, SolverConfig) pairs
    tol: float = 1e-9
    tol_mode: str = "absolute"
    repetitions: int = 1
    workers: int = 1
    output_dir: str = "runs"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [name for name, _ in self.solvers]
        if len(set(names)) != len(names):
            raise ValueError("solver names in a plan must be unique")
        if self.tol_mode not in ("absolute", "relative"):
            raise ValueError(f"unknown tol_mode {self.tol_mode!r}")
        if self.repetitions < 1 or self.workers < 1:
            raise ValueError("repetitions and workers must be positive")
        labels = [problem_name(p) for p in self.problems]
        if len(set(labels)) != len(labels):
            raise ValueError("problem names in a plan must be unique")


def problem_name(ref) -> str:
    if isinstance(ref, SyntheticSpec):
        return ref.name or f"synthetic-s{ref.s}-c{ref.c}-R{ref.R}-l{ref.l1}-{ref.l2}-seed{ref.seed}"
    return ref.name or os.path.splitext(os.path.basename(ref.file))[0]


def build_problem(ref):
    if isinstance(ref, SyntheticSpec):
        prob = make_synthetic(ref)
    else:
        prob = load_problem(ref.file, ref.rank, ref.seed)
    prob.name = problem_name(ref)
    return prob


def resolve_tol(cfg: SolverConfig, tol: float, tol_mode: str, problem) -> SolverConfig:
    """Absolute tolerance for ``problem``; relative mode scales by ``||grad f(x0)||``."""
    if tol_mode == "relative":
        g0 = gradient(problem.tensor, unpack(problem.x0, problem.shape, problem.rank))
        tol = tol * float(np.linalg.norm(g0))
    return replace(cfg, tol=tol)


def _safe(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", text)


def trace_path(output_dir, problem: str, solver: str, rep: int) -> str:
    return os.path.join(output_dir, f"{_safe(problem)}__{_safe(solver)}__r{rep}.trace")


def _provenance(ref) -> str:
    return json.dumps(asdict(ref), sort_keys=True)


def run_one(ref, solver_name: str, cfg: SolverConfig, tol: float, tol_mode: str, rep: int,
            output_dir: str | None = None) -> RunTrace:
    """Execute one run; failures become a trace with status ``failed: ...``."""
    name = problem_name(ref)
    try:
        prob = build_problem(ref)
        cfg = resolve_tol(cfg, tol, tol_mode, prob)
        _, trace = solve(prob.tensor, prob.x0, cfg, rank=prob.rank)
    except Exception as exc:  # a failed run must not abort the plan
        trace = RunTrace(status=f"failed: {type(exc).__name__}: {exc}", tol=tol)
    trace.solver = solver_name
    trace.problem = name
    trace.meta.update({
        "repetition": rep,
        "problem_ref": _provenance(ref),
        "config": config_to_json(cfg),
        "tol_mode": tol_mode,
        "init": "uniform(0,1) factor entries, PCG64",
    })
    if output_dir is not None:
        write_trace(trace, trace_path(output_dir, name, solver_name, rep))
    return trace


def _run_job(args):
    return run_one(*args)


def run_plan(plan: ExperimentPlan) -> list:
    """Run every (problem, solver, repetition) of ``plan``, writing traces as they finish.

    Traces are returned in plan order: problems outermost, then solvers,
    then repetitions.
    """
    os.makedirs(plan.output_dir, exist_ok=True)
    jobs = [(ref, name, cfg, plan.tol, plan.tol_mode, rep, plan.output_dir)
            for ref in plan.problems for name, cfg in plan.solvers for rep in range(plan.repetitions)]
    if plan.workers == 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=plan.workers) as pool:
        return list(pool.map(_run_job, jobs))


def config_to_json(cfg: SolverConfig) -> str:
    """Strict JSON; infinite budgets and caps become ``null``."""
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        return None if isinstance(v, float) and math.isinf(v) else v
    return json.dumps(clean(asdict(cfg)), sort_keys=True)


_MOMENTUM_KEYS = {"skip_duplicates", "max_weight"}
_RESTART_KEYS = {"eta0", "eta_min", "eta_decrement"}
_TOP_KEYS = {"max_sweeps", "max_seconds"}  # tolerance is plan-wide


def _solver_entry(entry, defaults: dict):
    if isinstance(entry, str):
        entry = {"name": entry}
    entry = {**defaults, **entry}
    name = entry.pop("name")
    label = entry.pop("label", None)
    momentum = {k: entry.pop(k) for k in list(entry) if k in _MOMENTUM_KEYS}
    restart = {k: entry.pop(k) for k in list(entry) if k in _RESTART_KEYS}
    ls = {k[3:]: entry.pop(k) for k in list(entry) if k.startswith("ls_")}
    unknown = set(entry) - _TOP_KEYS
    if unknown:
        raise ValueError(f"solver {name!r}: unknown keys {sorted(unknown)}")
    cfg = parse_solver_name(name, **entry)
    cfg = replace(cfg, momentum=replace(cfg.momentum, **momentum), restart=replace(cfg.restart, **restart),
                  ls=replace(cfg.ls, **ls))
    return label or format_solver_name(cfg), cfg


def _problem_entry(entry, base_dir):
    if "file" in entry:
        path = entry["file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return FileProblem(file=path, rank=int(entry["rank"]), seed=int(entry.get("seed", 0)),
                           name=entry.get("name", ""))
    return SyntheticSpec(s=int(entry["s"]), c=float(entry["c"]), R=int(entry["R"]),
                         l1=float(entry.get("l1", 0.0)), l2=float(entry.get("l2", 0.0)),
                         seed=int(entry.get("seed", 0)), name=entry.get("name", ""))


def plan_from_dict(d: dict, base_dir: str = ".") -> ExperimentPlan:
    known = {"output_dir", "workers", "repetitions", "tol", "tol_mode", "max_sweeps",
             "max_seconds", "problems", "solvers"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown plan keys: {sorted(unknown)}")
    if "problems" not in d or "solvers" not in d:
        raise ValueError("a plan needs 'problems' and 'solvers'")
    problems = d["problems"]
    if isinstance(problems, dict):
        if set(problems) != {"suite"}:
            raise ValueError("problem object must be {'suite': {...}}")
        problems = standard_suite(**problems["suite"])
    else:
        problems = [_problem_entry(p, base_dir) for p in problems]
    defaults = {k: d[k] for k in ("max_sweeps", "max_seconds") if k in d}
    solvers = [_solver_entry(s, defaults) for s in d["solvers"]]
    out = d.get("output_dir", "runs")
    if not os.path.isabs(out):
        out = os.path.join(base_dir, out)
    return ExperimentPlan(problems=problems, solvers=solvers, tol=float(d.get("tol", 1e-9)),
                          tol_mode=d.get("tol_mode", "absolute"),
                          repetitions=int(d.get("repetitions", 1)), workers=int(d.get("workers", 1)),
                          output_dir=out)


def load_plan(path) -> ExperimentPlan:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed plan file: {exc}") from None
    if not isinstance(d, dict):
        raise ValueError(f"{path}: plan must be a JSON object")
    return plan_from_dict(d, base_dir=os.path.dirname(os.path.abspath(path)))
