"""Convergence curves and tau-plot figures (SVG via matplotlib's Agg backend)."""
from __future__ import annotations

import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_COST_COLUMNS = {"sweep_equivalents": "sweep_equivalents", "wall_time": "wall_seconds"}


@dataclass
class CurveOutput:
    data_path: str
    plot_path: str
    restart_costs: np.ndarray


def curve_data(trace, metric: str = "sweep_equivalents") -> np.ndarray:
    """``(len(trace), 2)`` array of cost and ``||grad f|| / n_X``."""
    if not trace.records:
        raise ValueError("empty trace")
    cost = trace.column(_COST_COLUMNS[metric])
    return np.column_stack([cost, trace.column("grad_norm") / trace.n_x])


def emit_convergence_curve(trace, out_stem, metric: str = "sweep_equivalents") -> CurveOutput:
    """Write ``<out_stem>.dat`` and ``<out_stem>.svg`` for one trace.

    Restarted iterations are marked on the plot.
    """
    data = curve_data(trace, metric)
    data_path, plot_path = f"{out_stem}.dat", f"{out_stem}.svg"
    np.savetxt(data_path, data, header=f"{metric} grad_norm_over_n_x", fmt="%.17g")
    restarted = trace.column("restarted").astype(bool)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(data[:, 0], data[:, 1], lw=1.2, label=trace.solver)
    if restarted.any():
        ax.semilogy(data[restarted, 0], data[restarted, 1], "x", ms=4, color="tab:red", label="restart")
    if trace.tol:
        ax.axhline(trace.tol, color="0.5", ls=":", lw=1)
    ax.set_xlabel(metric.replace("_", " "))
    ax.set_ylabel(r"$\|\nabla f\| / n_X$")
    ax.set_title(f"{trace.problem} ({trace.status})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(plot_path, format="svg")
    plt.close(fig)
    return CurveOutput(data_path, plot_path, data[restarted, 0])


def plot_convergence(traces, path, metric: str = "sweep_equivalents") -> None:
    """Several traces of one problem on common axes."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for tr in traces:
        data = curve_data(tr, metric)
        ax.semilogy(data[:, 0], data[:, 1], lw=1.2, label=tr.solver)
    ax.set_xlabel(metric.replace("_", " "))
    ax.set_ylabel(r"$\|\nabla f\| / n_X$")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format=os.path.splitext(path)[1].lstrip(".") or "svg")
    plt.close(fig)


def plot_tau_profile(profile, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in profile.solvers:
        ax.step(profile.taus, profile.fractions[name], where="post", label=name)
    ax.set_xscale("log", base=2)
    ax.set_xlim(profile.taus[0], profile.taus[-1])
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(f"fraction of {profile.n_problems} problems")
    ax.set_title(f"performance profile ({profile.metric.replace('_', ' ')})")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format=os.path.splitext(path)[1].lstrip(".") or "svg")
    plt.close(fig)
