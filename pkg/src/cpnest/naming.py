"""Solver names such as ``Nesterov-ALS-RF-SG-D2-E`` <-> :class:`SolverConfig`.

Grammar (case-insensitive)::

    ALS                         plain ALS
    GD | Nesterov-GD            line-searched gradient baselines
    Nesterov-ALS                Nesterov weights, no restart
    Nesterov-ALS-LS             momentum weight by line search
    Nesterov-ALS-<tokens>       restarted variant; tokens in any order:
        RF | RG | RX            restart on function value, gradient norm, speed
        SN | SG | S1            Nesterov, gradient-ratio or constant momentum
        D<n>                    delay n > 1 in the restart test
        E                       scheduled eta (1.25, -0.02 per step, floor 1.15)

A momentum token is required for restarted variants; the restart token may be
omitted, giving momentum without restarts. Fields the name does not encode
(line search, tolerance, budgets, non-default eta parameters) come from the
keyword overrides.
"""
from __future__ import annotations

import re
from dataclasses import replace

from .accel import (ALS, GRADIENT_DESCENT, NESTEROV_DIRECT, NESTEROV_GRADIENT, NESTEROV_LS,
                    NESTEROV_RESTARTED, MomentumRule, RestartRule, SolverConfig)

_SIMPLE = {
    "als": ALS,
    "gd": GRADIENT_DESCENT,
    "nesterov-gd": NESTEROV_GRADIENT,
    "nesterov-als": NESTEROV_DIRECT,
    "nesterov-als-ls": NESTEROV_LS,
}
_SIMPLE_NAMES = {ALS: "ALS", GRADIENT_DESCENT: "GD", NESTEROV_GRADIENT: "Nesterov-GD",
                 NESTEROV_DIRECT: "Nesterov-ALS", NESTEROV_LS: "Nesterov-ALS-LS"}


class SolverNameError(ValueError):
    pass


def parse_solver_name(name: str, **overrides) -> SolverConfig:
    """Parse a solver name into a config; ``overrides`` set the remaining fields."""
    key = name.strip().lower()
    if key in _SIMPLE:
        return SolverConfig(variant=_SIMPLE[key], momentum=MomentumRule("SN"),
                            restart=RestartRule("none"), **overrides)
    prefix = "nesterov-als-"
    if not key.startswith(prefix):
        raise SolverNameError(f"unknown solver name {name!r}")
    restart = momentum = None
    delay, scheduled = 1, False
    for token in key[len(prefix):].split("-"):
        if token in ("rf", "rg", "rx") and restart is None:
            restart = token.upper()
        elif token in ("sn", "sg", "s1") and momentum is None:
            momentum = token.upper()
        elif re.fullmatch(r"d\d+", token) and delay == 1:
            delay = int(token[1:])
            if delay < 2:
                raise SolverNameError(f"{name!r}: delay token must have n > 1")
        elif token == "e" and not scheduled:
            scheduled = True
        else:
            raise SolverNameError(f"{name!r}: unexpected or repeated token {token!r}")
    if momentum is None:
        raise SolverNameError(f"{name!r}: restarted variants need a momentum token (SN, SG or S1)")
    if restart is None and (delay != 1 or scheduled):
        raise SolverNameError(f"{name!r}: D<n> and E require a restart token")
    base_restart = overrides.pop("restart", RestartRule())
    base_momentum = overrides.pop("momentum", MomentumRule())
    rule = replace(base_restart, kind=restart or "none", d=delay,
                   eta_mode="scheduled" if scheduled else "fixed_one")
    return SolverConfig(variant=NESTEROV_RESTARTED, momentum=replace(base_momentum, kind=momentum),
                        restart=rule, **overrides)


def format_solver_name(cfg: SolverConfig) -> str:
    if cfg.variant != NESTEROV_RESTARTED:
        return _SIMPLE_NAMES[cfg.variant]
    parts = ["Nesterov-ALS"]
    if cfg.restart.kind != "none":
        parts.append(cfg.restart.kind)
    parts.append(cfg.momentum.kind)
    if cfg.restart.kind != "none":
        if cfg.restart.d > 1:
            parts.append(f"D{cfg.restart.d}")
        if cfg.restart.eta_mode == "scheduled":
            parts.append("E")
    return "-".join(parts)
