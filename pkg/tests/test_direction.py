import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smcg import direction as dm
from smcg.direction import DirectionKind, RestartReason
from smcg.model import IterateState, SolverOptions

OPTS = SolverOptions()


def fr_ps(g, s, y, tau):
    """Exact rational -H g with H the explicit memoryless update."""
    dot = lambda a, b: sum(F(x) * F(z) for x, z in zip(a, b))
    sty, gs, gy, yy = dot(s, y), dot(g, s), dot(g, y), dot(y, y)
    cs = gy / sty - (F(tau) + yy / sty) * gs / sty
    return [-F(gi) + cs * F(si) + gs / sty * F(yi) for gi, si, yi in zip(g, s, y)]


def arr(*v):
    return np.array(v, dtype=float)


def state(g, s, y, g_prev=None, f_prev=1.0, f=0.0, k=1):
    g = np.asarray(g, float)
    y = np.asarray(y, float)
    return IterateState(
        k=k, x=np.zeros_like(g), f_k=f, g_k=g, f_prev=f_prev,
        g_prev=g - y if g_prev is None else np.asarray(g_prev, float),
        s_prev=np.asarray(s, float), y_prev=y, d_prev=np.asarray(s, float), alpha_prev=1.0,
    )


# ---------------------------------------------------------------------------
# worked examples


@pytest.mark.parametrize(
    "g, s, expected",
    [((1, 0), (0, 1), 0.0), ((1, 1), (2, 2), 1.0), ((1, 2), (3, 1), 0.5)],
)
def test_omega_bar_examples(g, s, expected):
    assert dm.omega_bar(arr(*g), arr(*s)) == pytest.approx(expected, abs=1e-15)


def test_omega_bar_rejects_zero_vector():
    with pytest.raises(ValueError, match="degenerate vector"):
        dm.omega_bar(arr(0, 0), arr(1, 0))


def test_perry_shanno_collapses_when_orthogonal():
    d = dm.perry_shanno(arr(1, 0), arr(0, 1), arr(0, 2), 1.0)
    np.testing.assert_array_equal(d, [-1.0, 0.0])


def test_perry_shanno_worked_example():
    d = dm.perry_shanno(arr(1, 0), arr(1, 1), arr(1, 2), 1.0)
    exact = fr_ps((1, 0), (1, 1), (1, 2), 1)
    assert exact == [F(-11, 9), F(1, 9)]
    np.testing.assert_allclose(d, [float(v) for v in exact], rtol=1e-15)


def test_perry_shanno_hs_form_when_gs_zero():
    g, s, y = arr(1, 1, 0), arr(1, -1, 2), arr(2, -1, 1)
    d = dm.perry_shanno(g, s, y, 7.0)
    np.testing.assert_allclose(d, -g + (g @ y) / (s @ y) * s, rtol=1e-15)


def test_perry_shanno_requires_curvature():
    with pytest.raises(ValueError, match="curvature condition violated"):
        dm.perry_shanno(arr(1, 0), arr(1, 0), arr(-1, 0), 1.0)


@pytest.mark.parametrize("fn", [dm.project_uv, dm.project_uv_rewritten, dm.subspace_uv])
def test_projection_worked_example(fn):
    u, v = fn(arr(1, 0), arr(1, 1), arr(1, 2), 1.0)
    assert u == pytest.approx(-4 / 3, rel=1e-14)
    assert v == pytest.approx(1 / 9, rel=1e-14)


@pytest.mark.parametrize("fn", [dm.project_uv, dm.project_uv_rewritten, dm.subspace_uv])
def test_projection_reduces_to_hs(fn):
    u, v = fn(arr(1, 1), arr(1, -1), arr(2, -1), 1.0)
    assert u == -1.0
    assert v == pytest.approx(1 / 3, rel=1e-15)


def test_projection_in_two_dimensions_is_identity():
    g, s, y = arr(0.3, -1.7), arr(2.0, 0.5), arr(1.1, 0.9)
    u, v = dm.project_uv(g, s, y, 0.8)
    np.testing.assert_allclose(u * g + v * s, dm.perry_shanno(g, s, y, 0.8), rtol=1e-13)


@pytest.mark.parametrize("fn", [dm.project_uv, dm.project_uv_rewritten, dm.subspace_uv])
def test_projection_parallel_raises(fn):
    with pytest.raises(ValueError, match="near-parallel subspace"):
        fn(arr(1, 1), arr(2, 2), arr(1, 2), 1.0)


def test_subspace_form_accurate_when_nearly_parallel():
    # 1 - omega = 1e-10: the closed forms drift by ~1e-8, the orthogonal split does not
    g = arr(1.0, 1e-5)
    s, y = arr(1.0, 0.0), arr(2.0, 1.0)
    exact = np.array([float(c) for c in fr_ps(g, s, y, 1)])
    u, v = dm.subspace_uv(g, s, y, 1.0)
    np.testing.assert_allclose(u * g + v * s, exact, rtol=1e-10)
    u, v = dm.project_uv(g, s, y, 1.0)
    assert np.abs(u * g + v * s - exact).max() > 1e-9


def test_eta_floor_nonpositive_gs():
    l, eta = dm.eta_floor(arr(-1, 0), arr(1, 0), u=5.0, omega_bar=1.0, opts=OPTS)
    assert l == 0.5
    assert eta == -0.5


def test_eta_floor_worked_example():
    l, eta = dm.eta_floor(arr(1, 0), arr(1, 1), u=-4 / 3, omega_bar=0.5, opts=OPTS)
    assert l == pytest.approx(0.2)
    assert eta == pytest.approx(-0.1)


def test_eta_floor_zero_gs():
    _, eta = dm.eta_floor(arr(1, 0), arr(0, 1), u=-1.0, omega_bar=0.0, opts=OPTS)
    assert eta == 0.0


@pytest.mark.parametrize("v, eta, out", [(0.5, -0.1, 0.5), (-1.0, -0.1, -0.1), (1 / 9, -0.1, 1 / 9)])
def test_truncate_v(v, eta, out):
    assert dm.truncate_v(v, eta) == out


@pytest.mark.parametrize(
    "g, g_prev, restart",
    [((1, 0), (1, 0), False), ((1, 0), (4, 0), True), ((1, 0), (0, 3), False), ((1, 0), (-1, 0), True)],
)
def test_orthogonality_restart(g, g_prev, restart):
    assert dm.orthogonality_restart(arr(*g), arr(*g_prev), OPTS) is restart


def test_mu_quartic_example():
    assert dm.mu_measure(1.0, 0.0, arr(0.0), arr(-1.0), arr(-4.0)) == pytest.approx(0.5)


def test_mu_zero_on_quadratic_step():
    x_prev, x = arr(1.0, 2.0), arr(0.3, -0.4)
    f = lambda z: 0.5 * z @ z
    assert dm.mu_measure(f(x_prev), f(x), x, x - x_prev, x - x_prev) == pytest.approx(0.0, abs=1e-15)


def test_mu_degenerate_curvature_sentinel():
    assert dm.mu_measure(1.0, 0.0, arr(1.0, 0.0), arr(0.0, 1.0), arr(1.0, 0.0)) == math.inf


def test_tau_unit_on_exact_quadratic_step():
    # f = 0.5||x||^2 from (1, 1) to (0.5, 0.5): ||g||^2 = 0.5, mu = 0
    st_ = state(g=(0.5, 0.5), s=(-0.5, -0.5), y=(-0.5, -0.5), f_prev=1.0, f=0.25)
    assert dm.tau_select(st_, OPTS) == 1.0


def test_tau_scaled_on_quartic_step():
    st_ = state(g=(0.0,), s=(-1.0,), y=(-4.0,), f_prev=1.0, f=0.0)
    assert dm.tau_select(st_, OPTS) == pytest.approx(4.0)


def test_tau_strategies():
    st_ = state(g=(1.0, 0.0), s=(1.0, 1.0), y=(1.0, 2.0))
    assert dm.tau_select(st_, OPTS.replace(tau_strategy="b")) == pytest.approx(1.5)
    assert dm.tau_select(st_, OPTS.replace(tau_strategy="h")) == pytest.approx(5 / 3)
    assert dm.tau_select(st_, OPTS.replace(tau_strategy="one")) == 1.0


def test_smcg_first_iteration_is_steepest():
    g = arr(1.0, -2.0)
    out = dm.smcg_direction(IterateState(k=0, x=np.zeros(2), f_k=0.0, g_k=g), OPTS)
    np.testing.assert_array_equal(out.d, -g)
    assert out.restart_reason is RestartReason.FIRST_ITER


def test_smcg_near_parallel_restart():
    out = dm.smcg_direction(state(g=(3.0, 1.0), s=(1.0, 0.0), y=(1.0, 0.0)), OPTS)
    assert out.kind is DirectionKind.STEEPEST_RESTART
    assert out.restart_reason is RestartReason.NEAR_PARALLEL
    assert out.omega_bar == pytest.approx(0.9)


def test_smcg_worked_direction():
    out = dm.smcg_direction(state(g=(1.0, 0.0), s=(1.0, 1.0), y=(1.0, 2.0)), OPTS.replace(tau_strategy="one"))
    assert out.kind is DirectionKind.SUBSPACE
    np.testing.assert_allclose(out.d, [-11 / 9, 1 / 9], rtol=1e-14)
    assert out.gtd == pytest.approx(-11 / 9, rel=1e-14)
    assert out.eta == pytest.approx(-0.1)
    assert out.t_dl == pytest.approx(-1.0, rel=1e-14)


def test_smcg_orthogonality_restart():
    out = dm.smcg_direction(state(g=(1.0, 0.0), s=(1.0, 1.0), y=(1.0, 2.0), g_prev=(4.0, 0.0)), OPTS)
    assert out.restart_reason is RestartReason.ORTHOGONALITY_FAIL


def test_smcg_curvature_guard():
    out = dm.smcg_direction(state(g=(1.0, 0.0), s=(1.0, 1.0), y=(-1.0, -2.0), g_prev=(0.0, 1.0)), OPTS)
    assert out.restart_reason is RestartReason.CURVATURE_FAIL


def test_dai_liao_worked_example():
    g, s, y = arr(1, 0), arr(1, 1), arr(1, 2)
    assert dm.dai_liao_t(g, s, y, 1.0) == pytest.approx(-1.0, rel=1e-14)
    d = dm.perry_shanno(g, s, y, 1.0)
    assert d @ y == pytest.approx(-1.0, rel=1e-14)


def test_dai_liao_exact_line_search_case():
    g, s, y = arr(1, 1), arr(1, -1), arr(2, -1)
    u, v = dm.project_uv(g, s, y, 1.0)
    assert (u * g + v * s) @ y == pytest.approx(0.0, abs=1e-15)


def test_eigen_worked_example():
    e = dm.eigen_diagnostics(arr(1, 0), arr(1, 1), arr(1, 2), 1.0)
    assert e.p == pytest.approx(10 / 9)
    assert e.gamma == pytest.approx(2 / 3)
    tr = 16 / 9
    assert e.lambda_min == pytest.approx((tr - math.sqrt(tr * tr - 8 / 3)) / 2, rel=1e-14)
    assert e.lambda_min == pytest.approx(0.537525, abs=1e-6)


def test_eigen_tau_h_above_half():
    s, y = arr(1.0, 0.3, -2.0), arr(0.5, 1.0, -1.0)
    e = dm.eigen_diagnostics(s, s, y, (y @ y) / (s @ y))
    assert e.gamma == pytest.approx(e.p)
    assert e.lambda_min == pytest.approx(e.p - math.sqrt(e.p**2 - e.p), rel=1e-12)
    assert e.lambda_min > 0.5


def test_eigen_identity_case():
    s = arr(1.0, 2.0)
    e = dm.eigen_diagnostics(s, s, s, 1.0)
    assert (e.p, e.gamma) == (1.0, 1.0)
    assert e.lambda_min == pytest.approx(1.0)


def test_eigen_matches_dense_matrix():
    rng = np.random.default_rng(7)
    s, y = rng.standard_normal(5), rng.standard_normal(5)
    y = y if s @ y > 0 else -y
    tau = 0.7
    sty = s @ y
    H = np.eye(5) - (np.outer(s, y) + np.outer(y, s)) / sty + (tau + y @ y / sty) * np.outer(s, s) / sty
    assert dm.eigen_diagnostics(s, s, y, tau).lambda_min == pytest.approx(np.linalg.eigvalsh(H).min(), rel=1e-10)


def test_beta_examples():
    assert dm.beta_hz(arr(0, 1), arr(1, 0), arr(1, 1)) == 1.0
    assert dm.beta_hz(arr(1, 1), arr(1, 0), arr(1, 1)) == -2.0
    assert dm.beta_dk(arr(1, 1), arr(1, 0), arr(1, 1)) == 0.0
    hs = 3.0 / 1.0
    assert dm.beta_hz(arr(0, 3), arr(1, 0), arr(1, 1)) == hs
    assert dm.beta_dk(arr(0, 3), arr(1, 0), arr(1, 1)) == hs


def test_beta_degenerate():
    with pytest.raises(ValueError, match="degenerate curvature"):
        dm.beta_hz(arr(1, 1), arr(1, 0), arr(0, 1))


# ---------------------------------------------------------------------------
# properties


@st.composite
def triples(draw, xi1=0.75):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, 30))
    scales = [draw(st.floats(-3, 3)) for _ in range(3)]
    g, s, y = (rng.standard_normal(n) * 10.0**e for e in scales)
    sty = s @ y
    if sty == 0:
        y = y + s
    y = y if s @ y > 0 else -y
    if dm.omega_bar(g, s) > xi1:
        # rotate g away from s
        g = g - 0.9 * (g @ s) / (s @ s) * s
    tau = 10.0 ** draw(st.floats(-2, 2))
    return g, s, y, tau


@settings(max_examples=300, deadline=None)
@given(triples())
def test_forms_agree(t):
    g, s, y, tau = t
    u, v = dm.project_uv(g, s, y, tau)
    nd = np.linalg.norm(u * g + v * s)
    for fn in (dm.project_uv_rewritten, dm.subspace_uv):
        u2, v2 = fn(g, s, y, tau)
        assert np.linalg.norm((u - u2) * g + (v - v2) * s) <= 1e-10 * nd


@settings(max_examples=300, deadline=None)
@given(triples())
def test_projection_residual_orthogonal(t):
    g, s, y, tau = t
    u, v = dm.project_uv(g, s, y, tau)
    d_ps = dm.perry_shanno(g, s, y, tau)
    res = d_ps - (u * g + v * s)
    scale = 1e-9 * np.linalg.norm(d_ps) * max(np.linalg.norm(g), np.linalg.norm(s))
    assert abs(res @ g) <= scale and abs(res @ s) <= scale


@settings(max_examples=300, deadline=None)
@given(triples())
def test_perry_shanno_secant_like(t):
    g, s, y, tau = t
    d = dm.perry_shanno(g, s, y, tau)
    assert d @ y == pytest.approx(-tau * (g @ s), abs=1e-10 * np.linalg.norm(d) * np.linalg.norm(y))


@settings(max_examples=300, deadline=None)
@given(triples())
def test_untruncated_descent_and_closed_form(t):
    g, s, y, _ = t
    sty = s @ y
    gg = g @ g
    for tau in (sty / (s @ s), (y @ y) / sty, 1.0):
        u, v = dm.subspace_uv(g, s, y, tau)
        gtd = g @ (u * g + v * s)
        assert gtd < 0
        assert gtd == pytest.approx(dm.gtd_closed_form(g, s, y, tau), rel=1e-9)
        e = dm.eigen_diagnostics(g, s, y, tau)
        assert e.p >= 1.0 - 1e-12 and e.gamma > 0 and e.lambda_min > 0
        assert -gtd >= e.lambda_min * gg * (1 - 1e-9)


@settings(max_examples=300, deadline=None)
@given(triples(), st.sampled_from(["adaptive", "b", "h", "one"]))
def test_assembled_direction_invariants(t, strategy):
    g, s, y, _ = t
    out = dm.smcg_direction(state(g, s, y), OPTS.replace(tau_strategy=strategy))
    assert out.gtd <= -1e-12 * (g @ g)
    if out.kind is DirectionKind.SUBSPACE:
        np.testing.assert_array_equal(out.d, out.u * g + out.v * s)
        assert out.v == max(out.v_raw, out.eta)
    else:
        np.testing.assert_array_equal(out.d, -g)


@settings(max_examples=300, deadline=None)
@given(triples())
def test_dai_liao_identity(t):
    g, s, y, tau = t
    u, v = dm.project_uv(g, s, y, tau)
    d = u * g + v * s
    t_dl = dm.dai_liao_t(g, s, y, tau)
    assert abs(d @ y - t_dl * (g @ s)) <= 1e-9 * np.linalg.norm(d) * np.linalg.norm(y)


@settings(max_examples=200, deadline=None)
@given(triples())
def test_hs_reduction_exact(t):
    g, s, y, tau = t
    g0 = g.copy()
    s0 = s.copy()
    g0[1::2] = 0.0
    s0[0::2] = 0.0
    if not s0 @ y > 0:
        y = -y
    if not s0 @ y > 0 or not g0.any() or not s0.any():
        return
    for fn in (dm.project_uv, dm.project_uv_rewritten, dm.subspace_uv):
        u, v = fn(g0, s0, y, tau)
        assert u == -1.0
        assert v == pytest.approx((g0 @ y) / (s0 @ y), rel=4e-16)


@settings(max_examples=300, deadline=None)
@given(triples(), st.sampled_from(["b", "h", "one"]))
def test_floor_branch_bound_when_band_is_tight(t, strategy):
    # the bound g'd <= -(1 - xi1)||g||^2 relies on g'y > 0, i.e. eta2 < 1
    g, s, y, _ = t
    opts = OPTS.replace(tau_strategy=strategy, eta2=0.9)
    out = dm.smcg_direction(state(g, s, y), opts)
    if out.kind is DirectionKind.SUBSPACE and g @ s <= 0 and out.v > out.v_raw:
        assert out.gtd <= -(1 - opts.xi1) * (g @ g)


def test_floor_branch_bound_can_fail_with_wide_band():
    # eta2 = 3 admits g'y < 0; here g'g_prev = 15 <= 3 ||g||^2 = 18 and g'y = -9
    g, s, y = arr(-1, -1, -2), arr(2, 1, -1), arr(2, 1, 3)
    out = dm.smcg_direction(state(g, s, y), OPTS.replace(tau_strategy="one"))
    assert out.kind is DirectionKind.SUBSPACE
    assert g @ s < 0 and out.v > out.v_raw
    assert out.gtd < 0
    assert out.gtd > -(1 - OPTS.xi1) * (g @ g)


def test_beta_dk_hz_relation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g, d, y = rng.standard_normal((3, 6))
        dty = d @ y
        assert dm.beta_dk(g, d, y) == pytest.approx(dm.beta_hz(g, d, y) + (y @ y / dty) * (g @ d / dty), rel=1e-12, abs=1e-12)
