"""Iteration driver shared by every direction scheme.

Each iteration picks a direction (with the counter-based restart applied
first), computes the initial trial step, runs the improved Wolfe line
search and updates the restart counters from the quadratic-closeness
measures ``r`` and ``r_bar`` of the step just taken.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections import Counter
from typing import Callable, Optional

import numpy as np

from . import direction as dirmod
from .direction import DirectionKind, DirectionOutcome, RestartReason, steepest
from .linesearch import LineSearchResult, LineSearchStatus, eta_bar, initial_step, search
from .model import (
    DirectionScheme,
    IterateState,
    IterationRecord,
    ObjectiveProblem,
    SolverOptions,
    SolverResult,
    Status,
    validate_options,
)

log = logging.getLogger(__name__)

# step_rule(state, d) -> alpha; replaces the line search (test harnesses only)
StepRule = Callable[[IterateState, np.ndarray], float]


def r_measures(f_prev: float, f: float, g_prev: np.ndarray, g: np.ndarray, s: np.ndarray) -> tuple[float, float]:
    """Trapezoid-rule measures of how quadratic ``f`` is along the last step.

    Both vanish on quadratics. ``r`` is ``inf`` when its denominator is 0.
    """
    gps = float(g_prev @ s)
    gs = float(g @ s)
    denom = gps + gs
    r = 2.0 * (f - f_prev) / denom - 1.0 if denom != 0.0 else math.inf
    r_bar = f - f_prev - 0.5 * (gps + gs)
    return r, r_bar


def update_counters(state: IterateState, r: float, r_bar: float, opts: SolverOptions) -> IterateState:
    quad = abs(r) <= opts.eps1 or abs(r_bar) <= opts.eps1
    return dataclasses.replace(
        state,
        iter_restart=state.iter_restart + 1,
        iter_quad=state.iter_quad + 1 if quad else 0,
    )


def counter_restart_due(state: IterateState, opts: SolverOptions) -> bool:
    return state.iter_restart >= opts.max_restart or (
        state.iter_quad == opts.min_quad and state.iter_quad == state.iter_restart
    )


def _conjugate(state: IterateState, beta_fn) -> DirectionOutcome:
    g = state.g_k
    if state.k == 0 or state.d_prev is None:
        return steepest(g, RestartReason.FIRST_ITER)
    try:
        beta = beta_fn(g, state.d_prev, state.y_prev)
    except ValueError:
        return steepest(g, RestartReason.CURVATURE_FAIL)
    d = -g + beta * state.d_prev
    gtd = float(g @ d)
    if not gtd < -1e-12 * float(np.linalg.norm(g)) * float(np.linalg.norm(d)):
        return steepest(g, RestartReason.DESCENT_FAIL)
    return DirectionOutcome(d=d, kind=DirectionKind.CONJUGATE, gtd=gtd, beta=beta)


def direction_dispatch(state: IterateState, opts: SolverOptions) -> DirectionOutcome:
    scheme = opts.direction_scheme
    if scheme is DirectionScheme.SMCG:
        return dirmod.smcg_direction(state, opts)
    if scheme is DirectionScheme.HZ:
        return _conjugate(state, dirmod.beta_hz)
    if scheme is DirectionScheme.DK:
        return _conjugate(state, dirmod.beta_dk)
    return steepest(state.g_k)


def _exact_step(problem, state, d, step_rule):
    alpha = float(step_rule(state, d))
    x_new = state.x + alpha * d
    f_new = float(problem.f(x_new))
    g_new = np.asarray(problem.grad(x_new), dtype=np.float64)
    return LineSearchResult(alpha, f_new, g_new, 1, 1, LineSearchStatus.EXACT)


def solve(
    problem: ObjectiveProblem,
    opts: Optional[SolverOptions] = None,
    *,
    trace: bool = False,
    step_rule: Optional[StepRule] = None,
) -> SolverResult:
    """Minimize ``problem`` from ``problem.x0``.

    Stops when ``||g||_inf <= opts.eps_grad``, after ``opts.max_iter``
    accepted steps, or when the line search fails along ``-g``.
    ``step_rule`` bypasses the line search; it exists for closed-form
    step harnesses on quadratics.
    """
    opts = validate_options(opts or SolverOptions())
    x = np.array(problem.x0, dtype=np.float64)
    f = float(problem.f(x))
    g = np.asarray(problem.grad(x), dtype=np.float64)
    if not math.isfinite(f):
        raise ValueError(f"{problem.name}: f(x0) is not finite")
    n_f = n_g = 1
    f0 = f
    state = IterateState(k=0, x=x, f_k=f, g_k=g)
    records: Optional[list[IterationRecord]] = [] if trace else None
    restarts: Counter = Counter()
    zsum = 0.0
    forced: Optional[RestartReason] = None
    status = Status.MAX_ITER

    gnorm = float(np.max(np.abs(g)))
    if gnorm <= opts.eps_grad:
        status = Status.CONVERGED

    while status is not Status.CONVERGED and state.k < opts.max_iter:
        k = state.k
        if k > 0 and counter_restart_due(state, opts):
            out = steepest(state.g_k, RestartReason.COUNTER_RESTART)
            state = dataclasses.replace(state, iter_restart=0, iter_quad=0)
        elif forced is not None:
            out = steepest(state.g_k, forced)
        else:
            out = direction_dispatch(state, opts)
        if out.restart_reason is not None:
            restarts[out.restart_reason.value] += 1

        mu_k = math.inf
        if k > 0:
            mu_k = dirmod.mu_measure(state.f_prev, state.f_k, state.g_k, state.s_prev, state.y_prev)

        d = out.d
        is_steepest = out.kind is DirectionKind.STEEPEST_RESTART
        eb = eta_bar(k, f0, opts)
        if step_rule is not None:
            ls = _exact_step(problem, state, d, step_rule)
        else:
            alpha0 = initial_step(k, state, d, opts, steepest=is_steepest)
            ls = search(problem, state.x, state.f_k, state.g_k, d, alpha0, eb, opts)
        n_f += ls.n_f
        n_g += ls.n_g

        if ls.status is LineSearchStatus.FAILED:
            if is_steepest:
                log.info("%s: line search failed along -g at k=%d", problem.name, k)
                status = Status.LINE_SEARCH_FAILURE
                break
            forced = RestartReason.LINE_SEARCH_FALLBACK
            continue
        forced = RestartReason.LINE_SEARCH_FALLBACK if ls.status is LineSearchStatus.FALLBACK_BEST else None

        dd = float(d @ d)
        zsum += out.gtd * out.gtd / dd
        new = state.advance(ls.alpha, d, ls.f_new, ls.g_new)
        new.mu_prev = mu_k
        r, r_bar = r_measures(new.f_prev, new.f_k, new.g_prev, new.g_k, new.s_prev)
        new = update_counters(new, r, r_bar, opts)
        gnorm = float(np.max(np.abs(new.g_k)))

        if records is not None:
            records.append(
                IterationRecord(
                    k=new.k,
                    f=new.f_k,
                    gnorm_inf=gnorm,
                    alpha=ls.alpha,
                    direction_kind=out.kind.value,
                    u=out.u,
                    v=out.v,
                    tau=out.tau,
                    gtd=out.gtd,
                    n_f_cum=n_f,
                    n_g_cum=n_g,
                    restart_reason=out.restart_reason.value if out.restart_reason else None,
                    f_start=state.f_k,
                    dphi_new=float(new.g_k @ d),
                    eta_bar=eb,
                    sty=float(new.s_prev @ new.y_prev),
                    ls_status=ls.status.value,
                    mu=mu_k,
                    r=r,
                    r_bar=r_bar,
                )
            )
        state = new
        if gnorm <= opts.eps_grad:
            status = Status.CONVERGED

    return SolverResult(
        x_final=state.x,
        f_final=state.f_k,
        gnorm_inf=gnorm,
        n_iter=state.k,
        n_f=n_f,
        n_g=n_g,
        status=status,
        trace=records,
        zoutendijk_sum=zsum,
        n_restarts=dict(restarts),
    )
