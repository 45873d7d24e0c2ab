"""Performance profiles (tau-plots).

For each problem, a solver's ratio is its cost divided by the smallest cost of
any solver that converged on that problem; unconverged runs have ratio
infinity. The profile value at ``tau`` is the fraction of problems whose ratio
is at most ``tau``.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


def default_taus(tau_max: float = 16.0, n: int = 200) -> np.ndarray:
    return np.geomspace(1.0, tau_max, n)


@dataclass
class TauProfile:
    taus: np.ndarray
    solvers: list
    fractions: dict
    metric: str = "sweep_equivalents"
    unsolved: str = "count"
    n_problems: int = 0
    ratios: dict = field(default_factory=dict, repr=False)

    def solve_rate(self, solver: str) -> float:
        r = self.ratios[solver]
        return float(np.mean(np.isfinite(r))) if len(r) else 0.0

    def check(self) -> None:
        """Assert monotonicity in ``tau`` and the solve-rate bound."""
        for name in self.solvers:
            frac = self.fractions[name]
            if np.any(np.diff(frac) < 0):
                raise AssertionError(f"profile of {name} decreases in tau")
            if np.any(frac > self.solve_rate(name) + 1e-15) or np.any(frac < 0):
                raise AssertionError(f"profile of {name} exceeds its solve rate")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau"] + list(self.solvers))
            for j, tau in enumerate(self.taus):
                writer.writerow([repr(float(tau))] + [repr(float(self.fractions[s][j])) for s in self.solvers])


def cost_table(traces, metric: str = "sweep_equivalents"):
    """``{problem: {solver: cost}}`` with ``inf`` for unconverged runs.

    Repeated runs of one (problem, solver) pair are averaged.
    """
    acc = defaultdict(lambda: defaultdict(list))
    for tr in traces:
        acc[tr.problem][tr.solver].append(tr.cost(metric) if tr.converged else math.inf)
    return {p: {s: float(np.mean(c)) for s, c in per.items()} for p, per in acc.items()}


def profile_from_costs(costs: dict, taus=None, metric: str = "sweep_equivalents",
                       unsolved: str = "count", solvers=None) -> TauProfile:
    """Profile from a ``{problem: {solver: cost}}`` table.

    ``unsolved="count"`` keeps problems nobody solved in the denominator;
    ``"drop"`` leaves them out.
    """
    if not costs:
        raise ValueError("cannot build a profile from an empty cost table")
    if unsolved not in ("count", "drop"):
        raise ValueError(f"unknown unsolved-problem policy {unsolved!r}")
    taus = default_taus() if taus is None else np.asarray(taus, dtype=float)
    if solvers is None:
        solvers = sorted({s for per in costs.values() for s in per})
    ratios = {s: [] for s in solvers}
    n_problems = 0
    for problem in sorted(costs):
        per = costs[problem]
        solved = [c for c in per.values() if math.isfinite(c)]
        if not solved and unsolved == "drop":
            continue
        n_problems += 1
        best = min(solved) if solved else math.inf
        for s in solvers:
            c = per.get(s, math.inf)
            if not math.isfinite(c) or not math.isfinite(best):
                ratios[s].append(math.inf)
            elif best == 0.0:
                ratios[s].append(1.0 if c == 0.0 else math.inf)
            else:
                ratios[s].append(c / best)
    ratios = {s: np.array(r, dtype=float) for s, r in ratios.items()}
    fractions = {s: (np.array([np.count_nonzero(r <= tau) for tau in taus], dtype=float) / n_problems
                     if n_problems else np.zeros(len(taus)))
                 for s, r in ratios.items()}
    return TauProfile(taus=taus, solvers=list(solvers), fractions=fractions, metric=metric,
                      unsolved=unsolved, n_problems=n_problems, ratios=ratios)


def tau_profile(traces, metric: str = "sweep_equivalents", taus=None, unsolved: str = "count") -> TauProfile:
    traces = list(traces)
    if not traces:
        raise ValueError("no traces given")
    solvers = list(dict.fromkeys(tr.solver for tr in traces))
    return profile_from_costs(cost_table(traces, metric), taus=taus, metric=metric,
                              unsolved=unsolved, solvers=solvers)
