"""Moré-Thuente line search for the strong Wolfe conditions.

A direct implementation of the MINPACK-2 ``dcsrch``/``dcstep`` interval
update: safeguarded cubic and quadratic interpolation, the modified function
``psi(a) = phi(a) - phi(0) - c_descent * a * phi'(0)`` during the first stage,
extrapolation limited to ``[1.1, 4]`` times the current step, and a bisection
fallback when the bracket does not shrink fast enough.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

CONVERGED = "converged"
MAX_ITERS = "max_iters"
DEGENERATE = "degenerate_direction"
# Interval became too small, rounding errors prevent progress, or the step hit
# step_min/step_max before the Wolfe conditions held.
NO_PROGRESS = "no_progress"

XTRAPL = 1.1
XTRAPU = 4.0


@dataclass(frozen=True)
class LineSearchConfig:
    c_descent: float = 1e-4
    c_curv: float = 1e-2
    step0: float = 1.0
    max_iters: int = 20
    step_min: float = 1e-20
    step_max: float = 1e20
    xtol: float = 1e-15

    def __post_init__(self):
        if not 0.0 < self.c_descent < self.c_curv < 1.0:
            raise ValueError("need 0 < c_descent < c_curv < 1")
        if self.step0 <= 0:
            raise ValueError("step0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 <= self.step_min < self.step_max:
            raise ValueError("need 0 <= step_min < step_max")


@dataclass
class LineSearchResult:
    step: float
    f_at_step: float
    g_dot_d_at_step: float
    n_evals: int
    status: str

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def more_thuente(phi: Callable[[float], Tuple[float, float]], cfg: LineSearchConfig = LineSearchConfig(),
                 phi0: float | None = None, dphi0: float | None = None) -> LineSearchResult:
    """Search for a step satisfying the strong Wolfe conditions.

    Parameters
    ----------
    phi : callable
        ``phi(a) -> (value, derivative)`` along the search direction.
    cfg : LineSearchConfig
    phi0, dphi0 : float, optional
        Value and derivative at ``a = 0`` if already known; otherwise ``phi(0)``
        is evaluated and counted in ``n_evals``.

    Returns
    -------
    LineSearchResult
        On convergence the step satisfies
        ``phi(step) <= phi(0) + c_descent * step * phi'(0)`` and
        ``|phi'(step)| <= c_curv * |phi'(0)|``. Otherwise the lowest point seen
        is returned, which is ``step = 0`` if no trial improved on ``phi(0)``.
    """
    n_evals = 0
    if phi0 is None or dphi0 is None:
        phi0, dphi0 = phi(0.0)
        n_evals += 1
    finit, ginit = float(phi0), float(dphi0)
    if not ginit < 0.0 or not math.isfinite(finit):
        return LineSearchResult(0.0, finit, ginit, n_evals, DEGENERATE)

    stp = min(max(cfg.step0, cfg.step_min), cfg.step_max)
    ftol, gtol, xtol = cfg.c_descent, cfg.c_curv, cfg.xtol
    gtest = ftol * ginit
    width = cfg.step_max - cfg.step_min
    width1 = 2.0 * width
    brackt = False
    stage = 1
    stx, fx, gx = 0.0, finit, ginit
    sty, fy, gy = 0.0, finit, ginit
    stmin, stmax = 0.0, stp + XTRAPU * stp
    best = (0.0, finit, ginit)

    for _ in range(cfg.max_iters):
        f, g = phi(stp)
        f, g = float(f), float(g)
        n_evals += 1
        if not (math.isfinite(f) and math.isfinite(g)):
            # treat an overflow as a very bad point and shrink toward stx
            f, g = math.inf, math.inf
        elif f < best[1]:
            best = (stp, f, g)
        ftest = finit + stp * gtest
        if f <= ftest and abs(g) <= gtol * (-ginit):
            return LineSearchResult(stp, f, g, n_evals, CONVERGED)
        if (brackt and (stp <= stmin or stp >= stmax)) or \
                (brackt and stmax - stmin <= xtol * stmax) or \
                (stp == cfg.step_max and f <= ftest and g <= gtest) or \
                (stp == cfg.step_min and (f > ftest or g >= gtest)):
            return LineSearchResult(*best, n_evals, NO_PROGRESS)
        if not math.isfinite(f):
            brackt = True
            sty, fy, gy = stp, f, g
            stp = stx + 0.5 * (stp - stx)
            stmin, stmax = min(stx, sty), max(stx, sty)
            continue

        if stage == 1 and f <= ftest and g >= 0.0:
            stage = 2
        if stage == 1 and fx >= f > ftest:
            # modified function psi
            fm, fxm, fym = f - stp * gtest, fx - stx * gtest, fy - sty * gtest
            gm, gxm, gym = g - gtest, gx - gtest, gy - gtest
            stx, fxm, gxm, sty, fym, gym, stp, brackt = _dcstep(
                stx, fxm, gxm, sty, fym, gym, stp, fm, gm, brackt, stmin, stmax)
            fx, fy = fxm + stx * gtest, fym + sty * gtest
            gx, gy = gxm + gtest, gym + gtest
        else:
            stx, fx, gx, sty, fy, gy, stp, brackt = _dcstep(
                stx, fx, gx, sty, fy, gy, stp, f, g, brackt, stmin, stmax)

        if brackt:
            if abs(sty - stx) >= 0.66 * width1:
                stp = stx + 0.5 * (sty - stx)
            width1 = width
            width = abs(sty - stx)
            stmin, stmax = min(stx, sty), max(stx, sty)
        else:
            stmin = stp + XTRAPL * (stp - stx)
            stmax = stp + XTRAPU * (stp - stx)
        stp = min(max(stp, cfg.step_min), cfg.step_max)
        if brackt and (stp <= stmin or stp >= stmax or stmax - stmin <= xtol * stmax):
            stp = stx

    return LineSearchResult(*best, n_evals, MAX_ITERS)


def _dcstep(stx, fx, dx, sty, fy, dy, stp, fp, dp, brackt, stpmin, stpmax):
    """Safeguarded step update of the uncertainty interval ``[stx, sty]``."""
    sgnd = dp * math.copysign(1.0, dx)

    if fp > fx:
        # higher function value: minimum is bracketed
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * math.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp < stx:
            gamma = -gamma
        p = (gamma - dx) + theta
        q = ((gamma - dx) + gamma) + dp
        r = p / q
        stpc = stx + r * (stp - stx)
        stpq = stx + ((dx / ((fx - fp) / (stp - stx) + dx)) / 2.0) * (stp - stx)
        if abs(stpc - stx) < abs(stpq - stx):
            stpf = stpc
        else:
            stpf = stpc + (stpq - stpc) / 2.0
        brackt = True
    elif sgnd < 0.0:
        # derivatives of opposite sign: minimum is bracketed
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * math.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp > stx:
            gamma = -gamma
        p = (gamma - dp) + theta
        q = ((gamma - dp) + gamma) + dx
        r = p / q
        stpc = stp + r * (stx - stp)
        stpq = stp + (dp / (dp - dx)) * (stx - stp)
        stpf = stpc if abs(stpc - stp) > abs(stpq - stp) else stpq
        brackt = True
    elif abs(dp) < abs(dx):
        # same sign, derivative magnitude decreases
        theta = 3.0 * (fx - fp) / (stp - stx) + dx + dp
        s = max(abs(theta), abs(dx), abs(dp))
        gamma = s * math.sqrt(max(0.0, (theta / s) ** 2 - (dx / s) * (dp / s)))
        if stp > stx:
            gamma = -gamma
        p = (gamma - dp) + theta
        q = (gamma + (dx - dp)) + gamma
        r = p / q
        if r < 0.0 and gamma != 0.0:
            stpc = stp + r * (stx - stp)
        elif stp > stx:
            stpc = stpmax
        else:
            stpc = stpmin
        stpq = stp + (dp / (dp - dx)) * (stx - stp)
        if brackt:
            stpf = stpc if abs(stpc - stp) < abs(stpq - stp) else stpq
            if stp > stx:
                stpf = min(stp + 0.66 * (sty - stp), stpf)
            else:
                stpf = max(stp + 0.66 * (sty - stp), stpf)
        else:
            stpf = stpc if abs(stpc - stp) > abs(stpq - stp) else stpq
            stpf = max(stpmin, min(stpmax, stpf))
    else:
        # same sign, derivative magnitude does not decrease
        if brackt:
            theta = 3.0 * (fp - fy) / (sty - stp) + dy + dp
            s = max(abs(theta), abs(dy), abs(dp))
            gamma = s * math.sqrt(max(0.0, (theta / s) ** 2 - (dy / s) * (dp / s)))
            if stp > sty:
                gamma = -gamma
            p = (gamma - dp) + theta
            q = ((gamma - dp) + gamma) + dy
            r = p / q
            stpf = stp + r * (sty - stp)
        elif stp > stx:
            stpf = stpmax
        else:
            stpf = stpmin

    if fp > fx:
        sty, fy, dy = stp, fp, dp
    else:
        if sgnd < 0.0:
            sty, fy, dy = stx, fx, dx
        stx, fx, dx = stp, fp, dp
    return stx, fx, dx, sty, fy, dy, stpf, brackt
