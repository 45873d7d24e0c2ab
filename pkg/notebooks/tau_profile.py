"""Performance profile of four solvers over a small synthetic suite.

Uses the two smallest standard classes with three instances each so the whole
script finishes in a few minutes on one core. The ``bench`` and ``profile``
subcommands do the same from the shell for larger suites.
"""
import os

from cpnest.harness import ExperimentPlan, run_plan, tau_profile
from cpnest.harness.plots import plot_tau_profile
from cpnest.naming import parse_solver_name
from cpnest.problems import standard_suite

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out", "suite")

names = ["ALS", "Nesterov-ALS-LS", "Nesterov-ALS-RF-SG", "Nesterov-ALS-RG-SN-E"]
plan = ExperimentPlan(
    problems=standard_suite(instances=3, classes=[1, 2]),
    solvers=[(n, parse_solver_name(n, max_sweeps=5000)) for n in names],
    tol=1e-9,
    output_dir=OUT,
)
traces = run_plan(plan)

for metric in ("sweep_equivalents", "wall_time"):
    prof = tau_profile(traces, metric=metric)
    prof.check()
    plot_tau_profile(prof, os.path.join(OUT, f"profile_{metric}.svg"))
    print(metric)
    for name in prof.solvers:
        f = prof.fractions[name]
        print(f"  {name:22s} fastest {f[0]:.2f}  within 2x {f[prof.taus.searchsorted(2.0)]:.2f}  "
              f"solved {prof.solve_rate(name):.2f}")
