"""Improved Wolfe line search.

A step ``alpha`` is accepted when

    f(x + alpha d) <= f(x) + min(eps_f |f(x)|, delta alpha g'd + eta_bar_k)
    g(x + alpha d)'d >= sigma g'd

The first trial is refined by one quadratic interpolation through
``phi(0)``, ``phi'(0)`` and ``phi(alpha0)``.  After that the search expands
by doubling until the curvature condition holds or the sufficient-decrease
test fails, then shrinks the bracket with secant steps on ``phi'`` built
from the slope at the lower end and the mean slope across the bracket,
falling back to bisection when a trial lands too close to either end.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import IterateState, ObjectiveProblem, SolverOptions

# a trial closer than this fraction of the bracket width to either end is bisected
_SAFEGUARD = 0.1
_MAX_EXPAND = 1e10


class LineSearchStatus(str, enum.Enum):
    EXACT = "exact"
    IMPROVED_WOLFE = "improved_wolfe"
    FALLBACK_BEST = "fallback_best"
    FAILED = "failed"


@dataclass
class LineSearchResult:
    alpha: float
    f_new: float
    g_new: np.ndarray
    n_f: int
    n_g: int
    status: LineSearchStatus

    @property
    def accepted(self) -> bool:
        return self.status in (LineSearchStatus.EXACT, LineSearchStatus.IMPROVED_WOLFE)


def eta_bar(k: int, f0: float, opts: SolverOptions) -> float:
    """Summable relaxation ``scale (1 + |f0|) / (k + 1)^2`` for iteration ``k``."""
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    return opts.eta_bar_scale * (1.0 + abs(f0)) / (k + 1) ** 2


def initial_step(k: int, state: IterateState, d: np.ndarray, opts: SolverOptions, *, steepest: bool) -> float:
    """First trial step.

    ``steepest`` tells whether ``d == -g``; other directions are capped at
    the unit step.  At ``k == 0`` the trial is ``1 / ||g0||_inf``.
    """
    g = state.g_k
    gtd = float(g @ d)
    if not gtd < 0.0:
        raise ValueError("not a descent direction")
    if k == 0 or state.alpha_prev is None or state.f_prev is None:
        return 1.0 / float(np.max(np.abs(g)))
    alpha0 = max(opts.phi * state.alpha_prev, -2.0 * abs(state.f_k - state.f_prev) / gtd)
    return alpha0 if steepest else min(1.0, alpha0)


def armijo_ok(f0: float, f_new: float, alpha: float, gtd: float, eta_bar_k: float, opts: SolverOptions) -> bool:
    return f_new <= f0 + min(opts.eps_f * abs(f0), opts.delta * alpha * gtd + eta_bar_k)


def curvature_ok(dphi_new: float, gtd: float, opts: SolverOptions) -> bool:
    return dphi_new >= opts.sigma * gtd


class _Phi:
    """Counted evaluations of f and its gradient along ``x + alpha d``."""

    def __init__(self, problem, x, d):
        self.problem, self.x, self.d = problem, x, d
        self.n_f = 0
        self.n_g = 0

    def f(self, alpha):
        self.n_f += 1
        with np.errstate(all="ignore"):
            val = float(self.problem.f(self.x + alpha * self.d))
        return val

    def g(self, alpha):
        self.n_g += 1
        with np.errstate(all="ignore"):
            return np.asarray(self.problem.grad(self.x + alpha * self.d), dtype=np.float64)


def _quad_min(a, fa, da, b, fb):
    """Minimizer of the quadratic matching f(a), f'(a), f(b); None if not convex."""
    h = b - a
    curv = fb - fa - da * h
    if not curv > 0.0:
        return None
    return a - da * h * h / (2.0 * curv)


def search(
    problem: ObjectiveProblem,
    x: np.ndarray,
    f: float,
    g: np.ndarray,
    d: np.ndarray,
    alpha0: float,
    eta_bar_k: float,
    opts: SolverOptions,
) -> LineSearchResult:
    gtd = float(g @ d)
    if not gtd < 0.0:
        raise ValueError("not a descent direction")
    if not alpha0 > 0.0:
        raise ValueError("initial step must be positive")
    phi = _Phi(problem, x, d)
    best = (math.inf, None, None)  # (f, alpha, grad-or-None)

    def note(alpha, fa, ga=None):
        nonlocal best
        if fa < best[0] or (ga is not None and alpha == best[1]):
            best = (fa, alpha, ga)

    # quadratic refinement of the first trial
    alpha = alpha0
    fa = phi.f(alpha)
    while not math.isfinite(fa) and phi.n_f < opts.max_ls_iter:
        alpha *= 0.1
        fa = phi.f(alpha)
    if not math.isfinite(fa):
        return LineSearchResult(alpha, f, g, phi.n_f, phi.n_g, LineSearchStatus.FAILED)
    note(alpha, fa)
    f_known: Optional[float] = fa
    aq = _quad_min(0.0, f, gtd, alpha, fa)
    if aq is not None and aq > 0.0 and abs(aq - alpha) > 1e-3 * alpha:
        alpha = min(max(aq, _SAFEGUARD * alpha), 10.0 * alpha)
        f_known = None

    lo, f_lo, d_lo = 0.0, f, gtd
    hi = f_hi = None
    for _ in range(opts.max_ls_iter):
        fa = f_known if f_known is not None else phi.f(alpha)
        f_known = None
        if math.isfinite(fa):
            note(alpha, fa)
        if not math.isfinite(fa) or not armijo_ok(f, fa, alpha, gtd, eta_bar_k, opts):
            hi, f_hi = alpha, fa
        else:
            ga = phi.g(alpha)
            da = float(ga @ d)
            note(alpha, fa, ga)
            if not math.isfinite(da):
                hi, f_hi = alpha, fa
            elif curvature_ok(da, gtd, opts):
                return LineSearchResult(alpha, fa, ga, phi.n_f, phi.n_g, LineSearchStatus.IMPROVED_WOLFE)
            else:
                lo, f_lo, d_lo = alpha, fa, da
        alpha = _next_trial(lo, f_lo, d_lo, hi, f_hi)
        if alpha is None:
            break

    f_best, a_best, g_best = best
    if a_best is None or not f_best < f:
        return LineSearchResult(a_best or alpha0, f, g, phi.n_f, phi.n_g, LineSearchStatus.FAILED)
    if g_best is None:
        g_best = phi.g(a_best)
    return LineSearchResult(a_best, f_best, g_best, phi.n_f, phi.n_g, LineSearchStatus.FALLBACK_BEST)


def _next_trial(lo, f_lo, d_lo, hi, f_hi):
    if hi is None:
        nxt = 2.0 * lo
        return nxt if nxt <= _MAX_EXPAND else None
    width = hi - lo
    if width <= 1e-15 * max(hi, 1e-300):
        return None
    # secant of phi' using the slope at lo and the mean slope over the bracket
    cand = _quad_min(lo, f_lo, d_lo, hi, f_hi) if math.isfinite(f_hi) else None
    margin = _SAFEGUARD * width
    if cand is None or not (lo + margin <= cand <= hi - margin):
        cand = lo + 0.5 * width
    return cand
