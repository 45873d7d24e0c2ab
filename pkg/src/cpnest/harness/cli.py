"""Command-line interface: ``cpnest {gen,decompose,bench,profile,curve}``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from ..accel import MOMENTUM_KINDS, RESTART_KINDS, VARIANTS
from ..naming import SolverNameError, format_solver_name, parse_solver_name
from ..problems import TensorFormatError, load_problem, make_synthetic, save_tensor, standard_suite
from .plots import emit_convergence_curve, plot_convergence, plot_tau_profile
from .profile import default_taus, tau_profile
from .runner import FileProblem, config_to_json, load_plan, resolve_tol, run_plan
from .traces import TraceFormatError, read_trace, read_trace_dir, write_trace


class CLIError(Exception):
    pass


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", default="Nesterov-ALS-RF-SG",
                   help="solver name, e.g. ALS, Nesterov-ALS-LS, Nesterov-ALS-RF-SG-D2-E")
    g = p.add_argument_group("solver overrides (take precedence over --solver)")
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--momentum", choices=MOMENTUM_KINDS)
    g.add_argument("--skip-duplicates", action="store_true", default=None,
                   help="gradient-ratio momentum ignores iterates duplicated by a restart")
    g.add_argument("--max-weight", type=float, help="upper bound on the momentum weight (default: none)")
    g.add_argument("--restart", choices=RESTART_KINDS)
    g.add_argument("--delay", type=int, help="restart delay d")
    g.add_argument("--eta-mode", choices=("fixed_one", "scheduled"))
    g.add_argument("--eta0", type=float)
    g.add_argument("--eta-min", type=float)
    g.add_argument("--eta-decrement", type=float)
    g.add_argument("--ls-c-descent", type=float)
    g.add_argument("--ls-c-curv", type=float)
    g.add_argument("--ls-step0", type=float)
    g.add_argument("--ls-max-iters", type=int)
    g.add_argument("--ls-step-min", type=float)
    g.add_argument("--ls-step-max", type=float)
    g.add_argument("--tol", type=float, default=1e-9)
    g.add_argument("--tol-mode", choices=("absolute", "relative"), default="absolute")
    g.add_argument("--max-sweeps", type=float, default=10000)
    g.add_argument("--max-seconds", type=float, default=math.inf)


def config_from_args(args):
    cfg = parse_solver_name(args.solver, tol=args.tol, max_sweeps=args.max_sweeps,
                            max_seconds=args.max_seconds)
    restart = cfg.restart
    for attr, flag in (("kind", "restart"), ("d", "delay"), ("eta_mode", "eta_mode"), ("eta0", "eta0"),
                       ("eta_min", "eta_min"), ("eta_decrement", "eta_decrement")):
        value = getattr(args, flag)
        if value is not None:
            restart = replace(restart, **{attr: value})
    momentum = cfg.momentum
    if args.momentum is not None:
        momentum = replace(momentum, kind=args.momentum)
    if args.skip_duplicates is not None:
        momentum = replace(momentum, skip_duplicates=args.skip_duplicates)
    if args.max_weight is not None:
        momentum = replace(momentum, max_weight=args.max_weight)
    ls = cfg.ls
    for attr in ("c_descent", "c_curv", "step0", "max_iters", "step_min", "step_max"):
        value = getattr(args, f"ls_{attr}")
        if value is not None:
            ls = replace(ls, **{attr: value})
    return replace(cfg, variant=args.variant or cfg.variant, restart=restart, momentum=momentum, ls=ls)


def cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    specs = standard_suite(args.instances, args.base_seed, args.classes)
    listing = []
    for spec in specs:
        prob = make_synthetic(spec)
        path = os.path.join(args.out, f"{spec.name}.tensor")
        save_tensor(prob.tensor, path)
        np.save(os.path.join(args.out, f"{spec.name}.x0.npy"), prob.x0)
        listing.append({**asdict(spec), "tensor": os.path.basename(path)})
    with open(os.path.join(args.out, "suite.json"), "w") as fh:
        json.dump(listing, fh, indent=1)
    print(f"wrote {len(specs)} problems to {args.out}")
    return 0


def cmd_decompose(args) -> int:
    cfg = config_from_args(args)
    prob = load_problem(args.tensor, args.rank, args.seed)
    if args.init is not None:
        x0 = np.load(args.init)
        if x0.shape != prob.x0.shape:
            raise CLIError(f"initial guess has {x0.size} entries, expected {prob.x0.size}")
        prob.x0 = x0
    cfg = resolve_tol(cfg, args.tol, args.tol_mode, prob)
    from ..accel import solve
    model, trace = solve(prob.tensor, prob.x0, cfg, rank=prob.rank)
    name = format_solver_name(cfg)
    trace.solver, trace.problem = name, prob.name
    trace.meta.update({"problem_ref": json.dumps(asdict(FileProblem(os.path.abspath(args.tensor),
                                                                    args.rank, args.seed))),
                       "config": config_to_json(cfg), "tol_mode": args.tol_mode,
                       "init": args.init or "uniform(0,1) factor entries, PCG64"})
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, f"{prob.name}__{name}")
    write_trace(trace, stem + ".trace")
    np.savez(stem + ".factors.npz", *model.factors)
    last = trace.final
    print(f"{name} on {prob.name}: {trace.status} after {last.k} iterations, "
          f"{last.sweep_equivalents:g} sweep-equivalents, f={last.f:.6e}, "
          f"|grad|/n_X={last.grad_norm / trace.n_x:.3e}")
    return 0


def cmd_bench(args) -> int:
    plan = load_plan(args.plan)
    if args.workers is not None:
        plan.workers = args.workers
    if args.out is not None:
        plan.output_dir = args.out
    traces = run_plan(plan)
    failed = [t for t in traces if t.status.startswith("failed")]
    for tr in traces:
        print(f"{tr.problem:24s} {tr.solver:28s} {tr.status:18s} "
              f"{tr.sweep_equivalents:10.1f} {tr.checksum()[:12]}")
    print(f"{len(traces)} runs, {sum(t.converged for t in traces)} converged, {len(failed)} failed; "
          f"traces in {plan.output_dir}")
    return 0


def cmd_profile(args) -> int:
    traces = read_trace_dir(args.traces)
    if not traces:
        raise CLIError(f"no .trace files in {args.traces}")
    prof = tau_profile(traces, metric=args.metric, taus=default_taus(args.tau_max, args.points),
                       unsolved=args.unsolved)
    prof.check()
    out = args.out or os.path.join(args.traces, f"profile_{args.metric}")
    prof.to_csv(out + ".csv")
    plot_tau_profile(prof, out + ".svg")
    for name in prof.solvers:
        print(f"{name:28s} fastest on {prof.fractions[name][0]:.2f}, solved {prof.solve_rate(name):.2f}")
    print(f"wrote {out}.csv and {out}.svg")
    return 0


def cmd_curve(args) -> int:
    traces = [read_trace(p) for p in args.traces]
    os.makedirs(args.out, exist_ok=True)
    for path, tr in zip(args.traces, traces):
        stem = os.path.join(args.out, os.path.splitext(os.path.basename(path))[0])
        emit_convergence_curve(tr, stem, args.metric)
    if args.combined:
        plot_convergence(traces, os.path.join(args.out, args.combined), args.metric)
    print(f"wrote {len(traces)} curves to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpnest", description="Nesterov-accelerated ALS for CP decomposition")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write the synthetic benchmark suite")
    p.add_argument("--out", required=True)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--classes", type=int, nargs="+", choices=range(1, 7))
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", help="decompose one tensor file with one solver")
    p.add_argument("tensor")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the uniform initial guess")
    p.add_argument("--init", help=".npy file with a packed initial guess")
    p.add_argument("--out", default=".")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("bench", help="run an experiment plan (JSON)")
    p.add_argument("plan")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="override the plan's output_dir")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("profile", help="tau-plot from a directory of traces")
    p.add_argument("traces")
    p.add_argument("--metric", choices=("sweep_equivalents", "wall_time"), default="sweep_equivalents")
    p.add_argument("--tau-max", type=float, default=16.0)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--unsolved", choices=("count", "drop"), default="count")
    p.add_argument("--out", help="output path stem (default: <traces>/profile_<metric>)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("curve", help="convergence curves from trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", default=".")
    p.add_argument("--metric", choices=("sweep_equivalents", "wall_time"), default="sweep_equivalents")
    p.add_argument("--combined", help="also write all traces into this one figure")
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, SolverNameError, TensorFormatError, TraceFormatError, ValueError, OSError) as exc:
        print(f"cpnest {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
