import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize._dcsrch import DCSRCH

from cpnest.linesearch import (CONVERGED, DEGENERATE, MAX_ITERS, LineSearchConfig, more_thuente)


def counting(fun):
    """Wrap ``fun(a) -> (value, slope)``, logging every trial step."""
    calls = []

    def phi(a):
        calls.append(a)
        return fun(a)
    return phi, calls


def scipy_trials(fun, cfg, phi0, dphi0):
    """Trial steps of the reference MINPACK-2 port shipped with scipy."""
    trials = []

    def f(a):
        trials.append(a)
        return fun(a)[0]

    def df(a):
        return fun(a)[1]

    search = DCSRCH(f, df, cfg.c_descent, cfg.c_curv, cfg.xtol, cfg.step_min, cfg.step_max)
    stp, _, _, task = search(cfg.step0, phi0=phi0, derphi0=dphi0, maxiter=cfg.max_iters)
    return stp, trials, task


def quartic(a):
    # phi(a) = (a - 3)^4 / 4 - 3 a, descent at 0
    return 0.25 * (a - 3.0) ** 4 - 3.0 * a, (a - 3.0) ** 3 - 3.0


def wiggly(a):
    return -a / (a * a + 2.0) + 0.01 * math.sin(20 * a), -(2.0 - a * a) / (a * a + 2.0) ** 2 + 0.2 * math.cos(20 * a)


def steep(a):
    # minimiser far beyond step0: needs extrapolation
    return (a - 40.0) ** 2, 2.0 * (a - 40.0)


@pytest.mark.parametrize("fun", [quartic, wiggly, steep])
@pytest.mark.parametrize("step0", [1.0, 0.1, 10.0])
def test_trial_sequence_matches_reference(fun, step0):
    cfg = LineSearchConfig(step0=step0)
    phi0, dphi0 = fun(0.0)
    phi, calls = counting(fun)
    res = more_thuente(phi, cfg, phi0=phi0, dphi0=dphi0)
    stp, trials, task = scipy_trials(fun, cfg, phi0, dphi0)
    assert np.allclose(calls, trials, rtol=1e-12, atol=0)
    if res.status == CONVERGED:
        assert task.startswith(b"CONVERGENCE")
        assert res.step == pytest.approx(stp, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(-5.0, 5.0), st.floats(0.05, 5.0))
def test_trial_sequence_matches_reference_on_cubics(center, skew, step0):
    def fun(a):
        u = a - center
        return u * u + 0.1 * skew * u ** 3 / (1 + u * u), 2 * u + 0.1 * skew * (3 * u * u + u ** 4) / (1 + u * u) ** 2

    phi0, dphi0 = fun(0.0)
    if not dphi0 < 0:
        return
    cfg = LineSearchConfig(step0=step0)
    phi, calls = counting(fun)
    more_thuente(phi, cfg, phi0=phi0, dphi0=dphi0)
    _, trials, _ = scipy_trials(fun, cfg, phi0, dphi0)
    assert np.allclose(calls, trials, rtol=1e-10, atol=1e-300)


def test_quadratic_minimum_at_step0():
    res = more_thuente(lambda a: (0.5 * (a - 1.0) ** 2, a - 1.0))
    assert res.status == CONVERGED
    assert res.step == 1.0
    assert res.n_evals == 2  # phi(0) plus the accepted trial


def test_quadratic_exact_minimiser():
    res = more_thuente(lambda a: (0.5 * a * a - a, a - 1.0), phi0=0.0, dphi0=-1.0)
    assert res.converged and res.step == 1.0 and res.n_evals == 1
    assert res.f_at_step == -0.5


def test_degenerate_direction():
    phi, calls = counting(lambda a: (a * a, 2 * a))
    res = more_thuente(phi, phi0=0.0, dphi0=0.0)
    assert res.status == DEGENERATE and res.step == 0.0 and calls == []
    res = more_thuente(lambda a: (a, 1.0))
    assert res.status == DEGENERATE and res.step == 0.0


@pytest.mark.parametrize("fun", [quartic, wiggly, steep])
def test_strong_wolfe_on_convergence(fun):
    cfg = LineSearchConfig()
    res = more_thuente(fun, cfg)
    phi0, dphi0 = fun(0.0)
    assert res.converged
    assert res.f_at_step <= phi0 + cfg.c_descent * res.step * dphi0
    assert abs(res.g_dot_d_at_step) <= cfg.c_curv * abs(dphi0)


def test_eval_budget_and_best_point():
    # the first trial overshoots badly; with one allowed evaluation a = 0 is the best point
    fun = lambda a: (0.5 * (a - 1e-3) ** 2, a - 1e-3)
    phi, calls = counting(fun)
    res = more_thuente(phi, LineSearchConfig(max_iters=1), *fun(0.0))
    assert res.status == MAX_ITERS
    assert len(calls) == 1 == res.n_evals
    assert res.step == 0.0 and res.f_at_step == fun(0.0)[0]
    res = more_thuente(fun, LineSearchConfig(max_iters=3), *fun(0.0))
    assert res.n_evals <= 3


def test_non_finite_trial_is_bisected():
    def fun(a):
        if a > 2.0:
            return math.inf, math.nan
        return 0.5 * (a - 1.5) ** 2, a - 1.5
    res = more_thuente(fun, LineSearchConfig(step0=8.0))
    assert res.converged
    assert math.isfinite(res.f_at_step)


def test_config_validation():
    with pytest.raises(ValueError):
        LineSearchConfig(c_descent=0.5, c_curv=0.1)
    with pytest.raises(ValueError):
        LineSearchConfig(step0=0.0)
    with pytest.raises(ValueError):
        LineSearchConfig(max_iters=0)
