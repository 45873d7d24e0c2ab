"""Experiment runner, trace files, performance profiles, plots and the CLI."""
from .profile import TauProfile, cost_table, default_taus, profile_from_costs, tau_profile
from .runner import ExperimentPlan, FileProblem, load_plan, plan_from_dict, run_one, run_plan
from .traces import read_trace, read_trace_dir, trace_to_text, write_trace

__all__ = [
    "TauProfile", "cost_table", "default_taus", "profile_from_costs", "tau_profile",
    "ExperimentPlan", "FileProblem", "load_plan", "plan_from_dict", "run_one", "run_plan",
    "read_trace", "read_trace_dir", "trace_to_text", "write_trace",
]
