"""ALS, Nesterov-accelerated ALS and gradient-baseline solvers.

All drivers work on the packed iterate vector ``x`` and return the final
:class:`~cpnest.cp_kernel.KruskalModel` together with a :class:`RunTrace`
holding one record per outer iteration.

Work accounting
---------------
Every driver counts ALS sweeps, objective-only evaluations and combined
objective/gradient evaluations. One *sweep-equivalent* is the cost of one ALS
sweep (``N`` MTTKRPs for an ``N``-way tensor). A gradient evaluation costs
``N`` MTTKRPs as well and an objective-only evaluation costs one, so::

    sweep_equivalents = n_als_sweeps + n_g_evals + n_f_evals / N

The count is deterministic, unlike wall time, which is recorded alongside.
"""
from __future__ import annotations

import hashlib
import math
import time
from collections import deque
from dataclasses import dataclass, field, fields

import numpy as np

from .cp_kernel import KruskalModel, als_sweep, num_variables, objective_and_gradient, pack, unpack
from .linesearch import LineSearchConfig, more_thuente
from .tensor_ops import as_tensor, norm_sq

ALS = "ALS"
NESTEROV_DIRECT = "NesterovALS_direct"
NESTEROV_LS = "NesterovALS_LS"
NESTEROV_RESTARTED = "NesterovALS_restarted"
GRADIENT_DESCENT = "GradientDescent"
NESTEROV_GRADIENT = "NesterovGradient"
VARIANTS = (ALS, NESTEROV_DIRECT, NESTEROV_LS, NESTEROV_RESTARTED, GRADIENT_DESCENT, NESTEROV_GRADIENT)

MOMENTUM_KINDS = ("SN", "SG", "S1")
RESTART_KINDS = ("none", "RF", "RG", "RX")

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
STALLED = "stalled"

STALL_WINDOW = 50
STALL_RTOL = 1e-16


@dataclass(frozen=True)
class MomentumRule:
    """Momentum weight rule.

    ``SN`` uses Nesterov's sequence indexed by the iterations since the last
    restart, ``SG`` the ratio of the two latest gradient norms and ``S1`` the
    constant one. ``skip_duplicates`` makes ``SG`` ignore iterates duplicated
    by a restart. ``max_weight`` caps the weight; the gradient ratio is
    unbounded and can exceed one by orders of magnitude in early iterations.
    """

    kind: str = "SN"
    skip_duplicates: bool = False
    max_weight: float = math.inf

    def __post_init__(self):
        if self.kind not in MOMENTUM_KINDS:
            raise ValueError(f"unknown momentum rule {self.kind!r}")
        if not self.max_weight > 0:
            raise ValueError("max_weight must be positive")


@dataclass(frozen=True)
class RestartRule:
    """Restart condition with delay ``d`` and relaxation ``eta``.

    ``eta_mode="scheduled"`` resets ``eta`` to ``eta0`` after each restart and
    lowers it by ``eta_decrement`` per iteration down to ``eta_min``;
    ``"fixed_one"`` keeps ``eta = 1``.
    """

    kind: str = "none"
    d: int = 1
    eta_mode: str = "fixed_one"
    eta0: float = 1.25
    eta_min: float = 1.15
    eta_decrement: float = 0.02

    def __post_init__(self):
        if self.kind not in RESTART_KINDS:
            raise ValueError(f"unknown restart rule {self.kind!r}")
        if self.d < 1:
            raise ValueError("restart delay d must be at least 1")
        if self.eta_mode not in ("fixed_one", "scheduled"):
            raise ValueError(f"unknown eta mode {self.eta_mode!r}")
        if self.eta_mode == "scheduled":
            if not self.eta0 >= self.eta_min >= 1.0:
                raise ValueError("need eta0 >= eta_min >= 1")
            if self.eta_decrement <= 0:
                raise ValueError("eta_decrement must be positive")


@dataclass(frozen=True)
class SolverConfig:
    variant: str = NESTEROV_RESTARTED
    momentum: MomentumRule = MomentumRule("SG")
    restart: RestartRule = RestartRule("RF")
    ls: LineSearchConfig = LineSearchConfig()
    tol: float = 1e-9
    max_sweeps: float = 10000
    max_seconds: float = math.inf

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown solver variant {self.variant!r}")
        if not self.tol >= 0:
            raise ValueError("tol must be non-negative")
        if not (self.max_sweeps > 0 and self.max_seconds > 0):
            raise ValueError("budgets must be positive")


@dataclass
class TraceRecord:
    k: int
    f: float
    grad_norm: float
    delta_x_norm: float
    beta_used: float
    restarted: bool
    n_f_evals: int
    n_g_evals: int
    n_als_sweeps: int
    wall_seconds: float
    sweep_equivalents: float = 0.0


TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))
# wall time is excluded from checksums
DETERMINISTIC_COLUMNS = tuple(c for c in TRACE_COLUMNS if c != "wall_seconds")


@dataclass
class RunTrace:
    solver: str = ""
    problem: str = ""
    n_x: int = 0
    ndim: int = 3
    tol: float = 0.0
    status: str = ""
    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def sweep_equivalents(self) -> float:
        return self.records[-1].sweep_equivalents if self.records else 0.0

    @property
    def wall_seconds(self) -> float:
        return self.records[-1].wall_seconds if self.records else 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    def cost(self, metric: str = "sweep_equivalents") -> float:
        if metric not in ("sweep_equivalents", "wall_time"):
            raise ValueError(f"unknown cost metric {metric!r}")
        return self.sweep_equivalents if metric == "sweep_equivalents" else self.wall_seconds

    def checksum(self) -> str:
        """SHA-256 over status and the deterministic record columns."""
        h = hashlib.sha256()
        h.update(f"{self.solver}|{self.problem}|{self.status}\n".encode())
        for rec in self.records:
            h.update(",".join(repr(getattr(rec, c)) for c in DETERMINISTIC_COLUMNS).encode())
            h.update(b"\n")
        return h.hexdigest()


@dataclass
class SolverState:
    """Mutable state of the restarted Nesterov-ALS iteration."""

    x_curr: np.ndarray
    x_prev: np.ndarray
    k: int = 1
    i: int = 1
    beta_prev: float = 0.0
    eta: float = 1.0
    lam_prev: float = 0.0
    history: deque = field(default_factory=lambda: deque(maxlen=2))
    duplicated: deque = field(default_factory=lambda: deque(maxlen=2))

    @classmethod
    def start(cls, x0, restart: RestartRule | None = None):
        # d + 1 entries for the delayed tests; 3 so that gradient-ratio momentum
        # still sees two non-duplicated entries right after a restart
        depth = max((restart.d if restart is not None else 1) + 1, 3)
        eta = restart.eta0 if restart is not None and restart.eta_mode == "scheduled" else 1.0
        return cls(x_curr=x0, x_prev=x0, history=deque(maxlen=depth),
                   duplicated=deque(maxlen=depth), eta=eta)

    def push(self, f: float, grad_norm: float, dx_norm: float, duplicated: bool = False):
        self.history.append((f, grad_norm, dx_norm))
        self.duplicated.append(duplicated)


_LAMBDAS = [0.0]


def nesterov_lambda(i: int) -> float:
    """``lambda_0 = 0``, ``lambda_i = (1 + sqrt(1 + 4 lambda_{i-1}^2)) / 2``."""
    while len(_LAMBDAS) <= i:
        lam = _LAMBDAS[-1]
        _LAMBDAS.append((1.0 + math.sqrt(1.0 + 4.0 * lam * lam)) / 2.0)
    return _LAMBDAS[i]


def nesterov_beta(i: int) -> float:
    """``(lambda_{i-1} - 1) / lambda_i`` for ``i >= 1``."""
    if i < 1:
        raise ValueError("Nesterov index must be at least 1")
    return (nesterov_lambda(i - 1) - 1.0) / nesterov_lambda(i)


def momentum_weight(rule: MomentumRule, state: SolverState) -> float:
    return min(_raw_weight(rule, state), rule.max_weight)


def _raw_weight(rule: MomentumRule, state: SolverState) -> float:
    if rule.kind == "S1":
        return 1.0
    if rule.kind == "SN":
        state.lam_prev = nesterov_lambda(state.i)
        return nesterov_beta(state.i)
    norms = [h[1] for h, dup in zip(state.history, state.duplicated)
             if not (rule.skip_duplicates and dup)]
    if len(norms) < 2:
        raise ValueError("gradient-ratio momentum needs two gradient norms in the history")
    if norms[-2] == 0.0:
        return 0.0
    return norms[-1] / norms[-2]


def restart_check(rule: RestartRule, state: SolverState) -> bool:
    """Whether the current iterate ``x_k`` should be discarded.

    Never fires right after a zero momentum weight or while the history is
    shorter than ``d + 1`` entries.
    """
    if rule.kind == "none" or state.beta_prev == 0.0:
        return False
    if len(state.history) < rule.d + 1:
        return False
    current, delayed = state.history[-1], state.history[-1 - rule.d]
    eta = state.eta
    if rule.kind == "RF":
        return current[0] > eta * delayed[0]
    if rule.kind == "RG":
        return current[1] > eta * delayed[1]
    return current[2] < eta * delayed[2]


def eta_advance(rule: RestartRule, eta: float, just_restarted: bool) -> float:
    """Relaxation factor for the next restart test."""
    if rule.eta_mode == "fixed_one":
        return 1.0
    if just_restarted:
        return rule.eta0
    return max(rule.eta_min, eta - rule.eta_decrement)


def eta_schedule(rule: RestartRule, steps: int) -> list:
    """The ``eta`` values of the ``steps`` iterations following a restart."""
    etas = [eta_advance(rule, 1.0, True)]
    for _ in range(steps - 1):
        etas.append(eta_advance(rule, etas[-1], False))
    return etas


def terminated(grad_norm: float, tol: float, n_x: int) -> bool:
    """``||grad f|| / n_X <= tol``."""
    return grad_norm / n_x <= tol


class _Problem:
    """Tensor plus cached norm, evaluation counters and the run clock."""

    def __init__(self, t, x0, rank, cfg: SolverConfig):
        self.t = as_tensor(t)
        self.shape = self.t.shape
        self.x0 = np.array(x0, dtype=np.float64)
        if rank is None:
            total = sum(self.shape)
            if self.x0.size % total:
                raise ValueError("initial guess length is not a multiple of sum(shape)")
            rank = self.x0.size // total
        self.rank = int(rank)
        self.n_x = num_variables(self.shape, self.rank)
        if self.x0.size != self.n_x:
            raise ValueError(f"initial guess has length {self.x0.size}, expected {self.n_x}")
        self.t_norm_sq = norm_sq(self.t)
        self.cfg = cfg
        self.n_f = self.n_g = self.n_als = 0
        self.t_start = time.perf_counter()
        self.best = (math.inf, self.x0)

    def evaluate(self, x):
        self.n_g += 1
        f, g = objective_and_gradient(self.t, unpack(x, self.shape, self.rank), self.t_norm_sq)
        return f, g

    def als(self, x):
        self.n_als += 1
        return pack(als_sweep(self.t, unpack(x, self.shape, self.rank)))

    def sweep_equivalents(self) -> float:
        return self.n_als + self.n_g + self.n_f / len(self.shape)

    def elapsed(self) -> float:
        return time.perf_counter() - self.t_start

    def over_budget(self) -> bool:
        return self.sweep_equivalents() >= self.cfg.max_sweeps or self.elapsed() >= self.cfg.max_seconds

    def note(self, f, x):
        if f < self.best[0]:
            self.best = (f, x)

    def record(self, trace, k, f, grad_norm, dx_norm, beta, restarted=False):
        trace.records.append(TraceRecord(
            k=k, f=float(f), grad_norm=float(grad_norm), delta_x_norm=float(dx_norm),
            beta_used=float(beta), restarted=bool(restarted), n_f_evals=self.n_f, n_g_evals=self.n_g,
            n_als_sweeps=self.n_als, wall_seconds=self.elapsed(),
            sweep_equivalents=self.sweep_equivalents()))

    def new_trace(self, name):
        return RunTrace(solver=name, n_x=self.n_x, ndim=len(self.shape), tol=self.cfg.tol)

    def finish(self, trace, status, x):
        trace.status = status
        if status != CONVERGED:
            x = self.best[1]
        return unpack(x, self.shape, self.rank), trace


class _StallMonitor:
    def __init__(self):
        self.count = 0
        self.last = None

    def __call__(self, f: float) -> bool:
        if self.last is not None and abs(f - self.last) < STALL_RTOL * abs(self.last):
            self.count += 1
        else:
            self.count = 0
        self.last = f
        return self.count >= STALL_WINDOW


def _stop_status(prob: _Problem, grad_norm, stall: _StallMonitor, f):
    if terminated(grad_norm, prob.cfg.tol, prob.n_x):
        return CONVERGED
    if not (math.isfinite(f) and math.isfinite(grad_norm)):
        # diverged; the best finite iterate is returned
        return STALLED
    if stall(f):
        return STALLED
    if prob.over_budget():
        return BUDGET_EXHAUSTED
    return None


def _name(cfg):
    from .naming import format_solver_name
    return format_solver_name(cfg)


def als(t, x0, cfg: SolverConfig = SolverConfig(variant=ALS), rank=None):
    """Plain ALS: ``x_{k+1} = ALS(x_k)`` until the gradient test passes."""
    prob = _Problem(t, x0, rank, cfg)
    trace = prob.new_trace(_name(cfg))
    stall = _StallMonitor()
    x_prev = x = prob.x0
    k = 1
    while True:
        f, g = prob.evaluate(x)
        prob.note(f, x)
        gn = float(np.linalg.norm(g))
        prob.record(trace, k, f, gn, np.linalg.norm(x - x_prev), 0.0)
        status = _stop_status(prob, gn, stall, f)
        if status:
            return prob.finish(trace, status, x)
        x_prev, x = x, prob.als(x)
        k += 1


def nesterov_als_direct(t, x0, cfg: SolverConfig = SolverConfig(variant=NESTEROV_DIRECT), rank=None):
    """Nesterov-ALS with the convex weight sequence indexed by ``k`` and no safeguard."""
    prob = _Problem(t, x0, rank, cfg)
    trace = prob.new_trace(_name(cfg))
    stall = _StallMonitor()
    x_prev = x = prob.x0
    k = 1
    while True:
        f, g = prob.evaluate(x)
        prob.note(f, x)
        gn = float(np.linalg.norm(g))
        # x_0 = x_1, so the first step is plain ALS whatever the weight
        beta = nesterov_beta(k) if k > 1 else 0.0
        prob.record(trace, k, f, gn, np.linalg.norm(x - x_prev), beta)
        status = _stop_status(prob, gn, stall, f)
        if status:
            return prob.finish(trace, status, x)
        x_prev, x = x, prob.als(x + beta * (x - x_prev))
        k += 1


def _line_oracle(prob: _Problem, x, direction, cache):
    def phi(step):
        f, g = prob.evaluate(x + step * direction)
        cache[step] = (f, g)
        return f, float(np.dot(g, direction))
    return phi


def nesterov_als_ls(t, x0, cfg: SolverConfig = SolverConfig(variant=NESTEROV_LS), rank=None):
    """Nesterov-ALS with the momentum weight from a Moré-Thuente line search.

    ``beta`` approximately minimizes ``f(x_k + beta (x_k - x_{k-1}))``; when the
    momentum direction is not a descent direction ``beta = 0``.
    """
    prob = _Problem(t, x0, rank, cfg)
    trace = prob.new_trace(_name(cfg))
    stall = _StallMonitor()
    x_prev = x = prob.x0
    k = 1
    while True:
        f, g = prob.evaluate(x)
        prob.note(f, x)
        gn = float(np.linalg.norm(g))
        delta = x - x_prev
        dx = float(np.linalg.norm(delta))
        status = _stop_status(prob, gn, stall, f)
        if status:
            prob.record(trace, k, f, gn, dx, 0.0)
            return prob.finish(trace, status, x)
        beta = 0.0
        slope = float(np.dot(g, delta))
        if slope < 0.0:
            res = more_thuente(_line_oracle(prob, x, delta, {}), cfg.ls, phi0=f, dphi0=slope)
            beta = res.step
        prob.record(trace, k, f, gn, dx, beta)
        x_prev, x = x, prob.als(x + beta * delta)
        k += 1


def nesterov_als_restarted(t, x0, cfg: SolverConfig = SolverConfig(), rank=None):
    """Restarted Nesterov-ALS.

    Each iteration tests the restart condition on ``x_k``; when it holds (and
    the previous weight was nonzero) ``x_k`` is replaced by ``x_{k-1}``, which
    then appears twice in the trace, and a plain ALS step is forced. Otherwise
    the momentum rule supplies ``beta_k``. The update is
    ``x_{k+1} = ALS(x_k + beta_k (x_k - x_{k-1}))``.
    """
    prob = _Problem(t, x0, rank, cfg)
    trace = prob.new_trace(_name(cfg))
    stall = _StallMonitor()
    rule, mom = cfg.restart, cfg.momentum
    state = SolverState.start(prob.x0, rule)

    # x_1 and the seed step x_2 = ALS(x_1)
    f, g = prob.evaluate(state.x_curr)
    prob.note(f, state.x_curr)
    gn = float(np.linalg.norm(g))
    state.push(f, gn, 0.0)
    prob.record(trace, 1, f, gn, 0.0, 0.0)
    status = _stop_status(prob, gn, stall, f)
    if status:
        return prob.finish(trace, status, state.x_curr)
    f_prev, gn_prev = f, gn
    state.x_curr = prob.als(state.x_prev)
    state.k, state.i, state.beta_prev = 2, 2, 0.0

    while True:
        x, x_prev = state.x_curr, state.x_prev
        f, g = prob.evaluate(x)
        prob.note(f, x)
        gn = float(np.linalg.norm(g))
        dx = float(np.linalg.norm(x - x_prev))
        state.push(f, gn, dx)
        restarted = restart_check(rule, state)
        if restarted:
            # discard x_k: it becomes a copy of x_{k-1}
            state.x_curr = x = x_prev
            f, gn, dx = f_prev, gn_prev, 0.0
            state.history.pop()
            state.duplicated.pop()
            state.push(f, gn, dx, duplicated=True)
            beta, state.i = 0.0, 1
        else:
            beta = momentum_weight(mom, state)
        prob.record(trace, state.k, f, gn, dx, beta, restarted)
        state.eta = eta_advance(rule, state.eta, restarted)
        status = _stop_status(prob, gn, stall, f)
        if status:
            return prob.finish(trace, status, x)
        state.x_prev, state.x_curr = x, prob.als(x + beta * (x - x_prev))
        f_prev, gn_prev = f, gn
        state.beta_prev = beta
        state.i += 1
        state.k += 1


def _gradient_step(prob: _Problem, y, f_y, g_y, cache):
    direction = -g_y
    slope = -float(np.dot(g_y, g_y))
    res = more_thuente(_line_oracle(prob, y, direction, cache), prob.cfg.ls, phi0=f_y, dphi0=slope)
    return y + res.step * direction, res.step


def gradient_baselines(t, x0, cfg: SolverConfig = SolverConfig(variant=GRADIENT_DESCENT), rank=None):
    """Gradient descent or Nesterov's accelerated gradient, both line-searched.

    ``NesterovGradient`` extrapolates ``y_k = x_k + beta_k (x_k - x_{k-1})``
    with Nesterov's sequence and takes the gradient step at ``y_k``; with
    ``x_0 = x_1`` its first step is a plain gradient step.
    """
    if cfg.variant not in (GRADIENT_DESCENT, NESTEROV_GRADIENT):
        raise ValueError(f"not a gradient baseline: {cfg.variant}")
    accelerated = cfg.variant == NESTEROV_GRADIENT
    prob = _Problem(t, x0, rank, cfg)
    trace = prob.new_trace(_name(cfg))
    stall = _StallMonitor()
    x_prev = x = prob.x0
    cached = None
    k = 1
    while True:
        f, g = cached if cached is not None else prob.evaluate(x)
        prob.note(f, x)
        gn = float(np.linalg.norm(g))
        dx = float(np.linalg.norm(x - x_prev))
        beta = nesterov_beta(k) if accelerated and k > 1 else 0.0
        status = _stop_status(prob, gn, stall, f)
        if status:
            prob.record(trace, k, f, gn, dx, beta)
            return prob.finish(trace, status, x)
        prob.record(trace, k, f, gn, dx, beta)
        y = x + beta * (x - x_prev)
        if np.array_equal(y, x):
            f_y, g_y = f, g
        else:
            f_y, g_y = prob.evaluate(y)
        cache = {}
        x_new, step = _gradient_step(prob, y, f_y, g_y, cache)
        cached = cache.get(step)
        if step == 0.0:
            cached = (f_y, g_y)
        x_prev, x = x, x_new
        k += 1


DRIVERS = {
    ALS: als,
    NESTEROV_DIRECT: nesterov_als_direct,
    NESTEROV_LS: nesterov_als_ls,
    NESTEROV_RESTARTED: nesterov_als_restarted,
    GRADIENT_DESCENT: gradient_baselines,
    NESTEROV_GRADIENT: gradient_baselines,
}


def solve(t, x0, cfg: SolverConfig, rank=None):
    """Run the driver selected by ``cfg.variant``."""
    return DRIVERS[cfg.variant](t, x0, cfg, rank=rank)


__all__ = [
    "MomentumRule", "RestartRule", "SolverConfig", "SolverState", "TraceRecord", "RunTrace",
    "momentum_weight", "restart_check", "eta_advance", "eta_schedule", "terminated",
    "nesterov_lambda", "nesterov_beta", "als", "nesterov_als_direct", "nesterov_als_ls",
    "nesterov_als_restarted", "gradient_baselines", "solve",
]
