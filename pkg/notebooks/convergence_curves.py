"""Gradient-norm histories of the six solver families on one collinear problem.

Writes ``curves.svg`` and one trace per solver into ``notebooks/out/``. The
direct Nesterov variant (no restart) is run with a reduced budget since it may
wander for a long time.
"""
import os

from cpnest import SyntheticSpec, make_synthetic, parse_solver_name, solve
from cpnest.harness import write_trace
from cpnest.harness.plots import plot_convergence

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
os.makedirs(OUT, exist_ok=True)

prob = make_synthetic(SyntheticSpec(s=50, c=0.9, R=3, l1=1, l2=1, seed=3))
solvers = ["ALS", "GD", "Nesterov-GD", "Nesterov-ALS", "Nesterov-ALS-LS", "Nesterov-ALS-RF-SG"]
traces = []
for name in solvers:
    budget = 1500 if "GD" in name else 5000
    _, tr = solve(prob.tensor, prob.x0, parse_solver_name(name, tol=1e-9, max_sweeps=budget), rank=3)
    tr.solver, tr.problem = name, "collinear-s50"
    write_trace(tr, os.path.join(OUT, f"{name}.trace"))
    traces.append(tr)
    print(f"{name:20s} {tr.status:16s} {tr.sweep_equivalents:8.0f} sweep-equivalents")

plot_convergence(traces, os.path.join(OUT, "curves.svg"))
print(f"wrote {OUT}/curves.svg")
