"""Search directions.

The main direction projects the scaled Perry-Shanno memoryless quasi-Newton
direction onto ``span{g, s}`` (``g`` the current gradient, ``s`` the last
step), truncates the ``s`` coefficient from below and falls back to ``-g``
whenever the subspace is degenerate or a restart test fires.  Hager-Zhang
and Dai-Kou conjugacy parameters are provided as baselines.

All inner products used by a direction are computed once; the public helpers
taking vectors exist for testing and for callers that only need one piece.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import IterateState, SolverOptions, TauStrategy

_EPS = np.finfo(np.float64).eps
# projection denominator floor, relative to ||g||^2 ||s||^2
_PARALLEL_TOL = 1e2 * _EPS


class RestartReason(str, enum.Enum):
    FIRST_ITER = "first_iter"
    NEAR_PARALLEL = "near_parallel"
    ORTHOGONALITY_FAIL = "orthogonality_fail"
    CURVATURE_FAIL = "curvature_fail"
    COUNTER_RESTART = "counter_restart"
    DESCENT_FAIL = "descent_fail"
    LINE_SEARCH_FALLBACK = "line_search_fallback"


class DirectionKind(str, enum.Enum):
    STEEPEST_RESTART = "steepest_restart"
    SUBSPACE = "subspace"
    CONJUGATE = "conjugate"


@dataclass
class DirectionOutcome:
    d: np.ndarray
    kind: DirectionKind
    gtd: float
    u: float = float("nan")
    v_raw: float = float("nan")
    v: float = float("nan")
    eta: float = float("nan")
    l: float = float("nan")
    omega_bar: float = float("nan")
    tau: float = float("nan")
    t_dl: float = float("nan")
    beta: float = float("nan")
    restart_reason: Optional[RestartReason] = None


@dataclass(frozen=True)
class EigenDiagnostics:
    p: float
    gamma: float
    lambda_min: float


def steepest(g: np.ndarray, reason: Optional[RestartReason] = None) -> DirectionOutcome:
    d = -g
    return DirectionOutcome(
        d=d, kind=DirectionKind.STEEPEST_RESTART, gtd=-float(g @ g), restart_reason=reason
    )


def omega_bar(g: np.ndarray, s: np.ndarray) -> float:
    """Squared cosine of the angle between ``g`` and ``s``, clamped to [0, 1]."""
    gg = float(g @ g)
    ss = float(s @ s)
    if gg == 0.0 or ss == 0.0:
        raise ValueError("degenerate vector")
    gs = float(g @ s)
    return min(1.0, max(0.0, gs * gs / (gg * ss)))


def perry_shanno(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """Perry-Shanno direction multiplied through by ``tau``.

    Satisfies ``d @ y == -tau * (g @ s)``.
    """
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    gy = float(g @ y)
    gs = float(g @ s)
    yy = float(y @ y)
    coef_s = gy / sty - (tau + yy / sty) * gs / sty
    return -g + coef_s * s + (gs / sty) * y


def _uv(gg, ss, gs, gy, sty, yy, tau):
    denom = gg * ss - gs * gs
    if denom <= _PARALLEL_TOL * gg * ss:
        raise ValueError("near-parallel subspace")
    u = -1.0 + gy * gs / (sty * gg) - (gg * gs * gs - gy * gs**3 / sty) / (gg * denom)
    v = gy / sty + (gg * gs - gy * gs * gs / sty) / denom - (tau + yy / sty) * gs / sty
    return u, v


def project_uv(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> tuple[float, float]:
    """Coefficients ``(u, v)`` of the least-squares projection of the
    Perry-Shanno direction onto ``span{g, s}``."""
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    return _uv(float(g @ g), float(s @ s), float(g @ s), float(g @ y), sty, float(y @ y), tau)


def project_uv_rewritten(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> tuple[float, float]:
    """Same projection written in terms of the squared cosine ``omega``;
    kept as an independent evaluation path for cross-checking."""
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    gg, ss, gs, gy, yy = float(g @ g), float(s @ s), float(g @ s), float(g @ y), float(y @ y)
    w = gs * gs / (gg * ss)
    if 1.0 - w <= _PARALLEL_TOL:
        raise ValueError("near-parallel subspace")
    u = (-1.0 + gy * gs / (sty * gg)) / (1.0 - w)
    v = (1.0 - 2.0 * w) / (1.0 - w) * gy / sty - (
        tau + yy / sty - sty / ((1.0 - w) * ss)
    ) * gs / sty
    return u, v


def _uv_orth(g, s, y, gg, ss, gs, gy, sty, yy, tau):
    # split g = g_perp + (gs/ss) s; Delta = ss ||g_perp||^2 without cancellation
    g_perp = g - (gs / ss) * s
    gp2 = float(g_perp @ g_perp)
    if gp2 <= _PARALLEL_TOL * gg:
        raise ValueError("near-parallel subspace")
    u = -1.0 + (gs / sty) * float(y @ g_perp) / gp2
    v = gy / sty - (tau + yy / sty) * gs / sty - u * gs / ss
    return u, v


def subspace_uv(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> tuple[float, float]:
    """The projection coefficients evaluated through the part of ``g``
    orthogonal to ``s``.

    Algebraically identical to :func:`project_uv`, but the closed forms lose
    about ``eps / (1 - omega)`` relative accuracy to cancellation in
    ``||g||^2 ||s||^2 - (g's)^2``; this evaluation does not.  The solver uses
    it.
    """
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    gg, ss = float(g @ g), float(s @ s)
    return _uv_orth(g, s, y, gg, ss, float(g @ s), float(g @ y), sty, float(y @ y), tau)


def _eta_floor(gs, ss, u, w, opts: SolverOptions):
    if gs <= 0.0:
        l = opts.xi2
    else:
        if w > 0.0:
            cand = -1.0 + (1.0 + u) / w
        else:
            cand = math.copysign(math.inf, 1.0 + u)
        l = min(max(opts.xi2_bbar, cand), opts.xi2_bar)
    return l, -l * abs(gs) / ss


def eta_floor(g: np.ndarray, s: np.ndarray, u: float, omega_bar: float, opts: SolverOptions) -> tuple[float, float]:
    """Lower bound ``eta`` for the ``s`` coefficient and its multiplier ``l``."""
    ss = float(s @ s)
    if ss == 0.0:
        raise ValueError("degenerate vector")
    return _eta_floor(float(g @ s), ss, u, omega_bar, opts)


def truncate_v(v: float, eta: float) -> float:
    return v if v >= eta else eta


def orthogonality_restart(g: np.ndarray, g_prev: np.ndarray, opts: SolverOptions) -> bool:
    """True when ``g @ g_prev`` leaves the band ``[-eta1, eta2] * ||g||^2``."""
    return _band_violated(float(g @ g), float(g @ g_prev), opts)


def _band_violated(gg, ggp, opts):
    return ggp > opts.eta2 * gg or ggp < -opts.eta1 * gg


def mu_measure(f_prev: float, f: float, g: np.ndarray, s: np.ndarray, y: np.ndarray) -> float:
    """How far ``f`` is from quadratic along the last step; 0 for quadratics.

    Returns ``inf`` when ``s @ y == 0``.
    """
    sty = float(s @ y)
    if sty == 0.0:
        return math.inf
    return abs(2.0 * (f_prev - f + float(g @ s)) / sty - 1.0)


def _tau(strategy, ss, sty, yy, gg, mu, mu_prev, opts):
    tau_b = sty / ss
    if strategy is TauStrategy.B:
        return tau_b
    if strategy is TauStrategy.H:
        return yy / sty
    if strategy is TauStrategy.ONE:
        return 1.0
    near_quadratic = mu <= opts.xi3 or max(mu, mu_prev) <= opts.xi4
    small_step = gg <= opts.xi6 or ss <= opts.xi5
    return 1.0 if (near_quadratic and small_step) else tau_b


def tau_select(state: IterateState, opts: SolverOptions) -> float:
    """Scaling factor for the memoryless quasi-Newton direction."""
    s, y, g = state.s_prev, state.y_prev, state.g_k
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    mu = mu_measure(state.f_prev, state.f_k, g, s, y)
    return _tau(opts.tau_strategy, float(s @ s), sty, float(y @ y), float(g @ g), mu, state.mu_prev, opts)


def _dai_liao_t(gg, ss, gs, gy, sty, yy, tau):
    denom = gg * ss - gs * gs
    if denom <= _PARALLEL_TOL * gg * ss:
        raise ValueError("near-parallel subspace")
    return (gy * gy * ss / sty - 2.0 * gy * gs + gg * sty) / denom - (tau + yy / sty)


def dai_liao_t(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> float:
    """Parameter ``t`` with ``d @ y == t * (g @ s)`` for the untruncated
    subspace direction ``d``."""
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    return _dai_liao_t(float(g @ g), float(s @ s), float(g @ s), float(g @ y), sty, float(y @ y), tau)


def gtd_closed_form(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> float:
    """``g @ d`` of the untruncated subspace direction, without forming ``d``."""
    sty = float(s @ y)
    gs, gy = float(g @ s), float(g @ y)
    return -float(g @ g) + 2.0 * gs * gy / sty - (tau + float(y @ y) / sty) * gs * gs / sty


def eigen_diagnostics(g: np.ndarray, s: np.ndarray, y: np.ndarray, tau: float) -> EigenDiagnostics:
    """Smallest eigenvalue of the symmetric part of the implied matrix ``H``
    (``d = -H g``); ``-g @ d >= lambda_min * ||g||^2``.

    ``g`` is accepted for signature symmetry with the other helpers; the
    eigenvalue depends on ``s``, ``y`` and ``tau`` only.
    """
    sty = float(s @ y)
    if not sty > 0.0:
        raise ValueError("curvature condition violated")
    ss, yy = float(s @ s), float(y @ y)
    p = yy * ss / (sty * sty)
    gamma = tau * ss / sty
    tr = p + gamma
    disc = max(tr * tr - 4.0 * gamma, 0.0)
    # smaller root via the product to avoid cancellation when gamma << p
    lam_max = 0.5 * (tr + math.sqrt(disc))
    lam_min = gamma / lam_max
    return EigenDiagnostics(p=p, gamma=gamma, lambda_min=lam_min)


def smcg_direction(state: IterateState, opts: SolverOptions) -> DirectionOutcome:
    """Subspace direction ``u g + max(v, eta) s`` or a steepest-descent restart."""
    g = state.g_k
    if state.k == 0 or state.s_prev is None:
        return steepest(g, RestartReason.FIRST_ITER)
    s, y = state.s_prev, state.y_prev
    gg = float(g @ g)
    ss = float(s @ s)
    gs = float(g @ s)
    if gg == 0.0 or ss == 0.0:
        return steepest(g, RestartReason.NEAR_PARALLEL)
    w = min(1.0, max(0.0, gs * gs / (gg * ss)))
    if w > opts.xi1:
        out = steepest(g, RestartReason.NEAR_PARALLEL)
        out.omega_bar = w
        return out
    if _band_violated(gg, float(g @ state.g_prev), opts):
        out = steepest(g, RestartReason.ORTHOGONALITY_FAIL)
        out.omega_bar = w
        return out
    sty = float(s @ y)
    if not sty > 0.0:
        out = steepest(g, RestartReason.CURVATURE_FAIL)
        out.omega_bar = w
        return out
    gy = float(g @ y)
    yy = float(y @ y)
    mu = mu_measure(state.f_prev, state.f_k, g, s, y)
    tau = _tau(opts.tau_strategy, ss, sty, yy, gg, mu, state.mu_prev, opts)
    try:
        u, v_raw = _uv_orth(g, s, y, gg, ss, gs, gy, sty, yy, tau)
        t_dl = _dai_liao_t(gg, ss, gs, gy, sty, yy, tau)
    except ValueError:
        out = steepest(g, RestartReason.NEAR_PARALLEL)
        out.omega_bar = w
        return out
    l, eta = _eta_floor(gs, ss, u, w, opts)
    v = truncate_v(v_raw, eta)
    d = u * g + v * s
    gtd = float(g @ d)
    common = dict(u=u, v_raw=v_raw, v=v, eta=eta, l=l, omega_bar=w, tau=tau, t_dl=t_dl)
    if not gtd <= -1e-12 * gg:
        # rounding safety: never hand the line search a non-descent direction
        out = steepest(g, RestartReason.DESCENT_FAIL)
        for key, val in common.items():
            setattr(out, key, val)
        return out
    return DirectionOutcome(d=d, kind=DirectionKind.SUBSPACE, gtd=gtd, **common)


def _beta_parts(g_next, d, y):
    dty = float(d @ y)
    if dty == 0.0:
        raise ValueError("degenerate curvature")
    return float(g_next @ y) / dty, float(y @ y) / dty * float(g_next @ d) / dty


def beta_hz(g_next: np.ndarray, d: np.ndarray, y: np.ndarray) -> float:
    """Hager-Zhang conjugacy parameter."""
    hs, corr = _beta_parts(g_next, d, y)
    return hs - 2.0 * corr


def beta_dk(g_next: np.ndarray, d: np.ndarray, y: np.ndarray) -> float:
    """Dai-Kou conjugacy parameter."""
    hs, corr = _beta_parts(g_next, d, y)
    return hs - corr
