"""CP tensor decomposition with ALS and Nesterov-accelerated ALS solvers."""
__version__ = "0.1.0"

from .accel import (MomentumRule, RestartRule, RunTrace, SolverConfig, als, gradient_baselines,
                    nesterov_als_direct, nesterov_als_ls, nesterov_als_restarted, solve)
from .cp_kernel import (KruskalModel, als_sweep, gradient, objective, objective_and_gradient, pack,
                        reconstruct, unpack)
from .linesearch import LineSearchConfig, more_thuente
from .naming import format_solver_name, parse_solver_name
from .problems import SyntheticSpec, load_tensor, make_synthetic, save_tensor, standard_suite

__all__ = [
    "MomentumRule", "RestartRule", "RunTrace", "SolverConfig", "als", "gradient_baselines",
    "nesterov_als_direct", "nesterov_als_ls", "nesterov_als_restarted", "solve",
    "KruskalModel", "als_sweep", "gradient", "objective", "objective_and_gradient", "pack",
    "reconstruct", "unpack", "LineSearchConfig", "more_thuente", "format_solver_name",
    "parse_solver_name", "SyntheticSpec", "load_tensor", "make_synthetic", "save_tensor",
    "standard_suite",
]
