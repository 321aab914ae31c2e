import math

import numpy as np
import pytest
from scipy.integrate import quad

from selfnorm_lab.distributions import (
    ParameterError,
    SeedStream,
    make_pareto_multiplier,
    make_slowly_varying_multiplier,
    make_weight_law,
)
from selfnorm_lab.levy_calculus import (
    BivariateLevyView,
    ConvergenceReport,
    LevyTail,
    alpha_h,
    check_levy_convergence,
    lambda_bar,
    phi_psi,
    pi_bar,
    pi_neg,
    prelimit_lambda_n,
    prelimit_pi_n,
    prelimit_truncated_first_moments,
    prelimit_truncated_second_moments,
    second_moment_smallh_scan,
    stable_levy_tail,
    truncated_first_moments,
    truncated_second_moments,
)


@pytest.fixture(scope="module")
def stable_half():
    return stable_levy_tail(0.5)


@pytest.fixture(scope="module")
def view_u01(stable_half):
    return BivariateLevyView(make_weight_law("uniform01"), stable_half)


@pytest.fixture(scope="module")
def view_rademacher(stable_half):
    return BivariateLevyView(make_weight_law("rademacher"), stable_half)


# ---------------------------------------------------------------------------
# One-dimensional tails
# ---------------------------------------------------------------------------


def test_lambda_bar_stable_values(stable_half):
    assert lambda_bar(stable_half, 4.0) == pytest.approx(0.5)
    assert lambda_bar(stable_half, 1.0) == pytest.approx(1.0)
    assert lambda_bar(stable_half, 1e12) < 1e-5
    with pytest.raises(ParameterError):
        lambda_bar(stable_half, 0.0)


def test_prelimit_lambda_pareto_exact():
    y = make_pareto_multiplier(0.5)
    for n in (10, 10_000):
        for v in (0.25, 1.0, 4.0):
            assert prelimit_lambda_n(y, n, v) == pytest.approx(v ** -0.5, rel=1e-12)
    assert prelimit_lambda_n(y, 100, 1e9) < 1e-4


def test_prelimit_lambda_slowly_varying_quantile_identity():
    # with a_n the upper 1/n quantile, n * survival(a_n) = 1 exactly,
    # evaluated in log space since a_n = e^n overflows
    y = make_slowly_varying_multiplier()
    assert prelimit_lambda_n(y, 1_000_000, 1.0) == pytest.approx(1.0, rel=1e-12)
    # for fixed v the row tail tends to one: no mass escapes to any (v, inf]
    vals = [prelimit_lambda_n(y, n, 4.0) for n in (10, 100, 10_000)]
    assert all(b > a for a, b in zip(vals[:-1], vals[1:]))
    assert vals[-1] == pytest.approx(1.0, abs=1e-3)


# ---------------------------------------------------------------------------
# Bivariate tails
# ---------------------------------------------------------------------------


def test_pi_bar_uniform01_values(view_u01):
    # substitution gives u^-beta * E[X^beta] = 1 * 2/3 at u=1, v=0
    assert pi_bar(view_u01, 1.0, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-8)
    assert pi_bar(view_u01, 0.0, 1.0) == pytest.approx(1.0)
    assert pi_bar(view_u01, 1.0, 1e10) < 1e-4
    with pytest.raises(ParameterError):
        pi_bar(view_u01, 0.0, 0.0)


def test_pi_bar_substitution_identity(stable_half):
    # pi_bar(u, 0) = u^-beta E[(X+)^beta], pi_neg(u, 0) = u^-beta E[(X-)^beta]
    for kind in ("uniform01", "rademacher", "standard_gaussian"):
        x = make_weight_law(kind)
        view = BivariateLevyView(x, stable_half)
        for u in (0.5, 1.0, 2.0):
            want = u ** -0.5 * x.beta_moment_pos(0.5)
            assert pi_bar(view, u, 0.0) == pytest.approx(want, rel=1e-7), (kind, u)
            if x.support[0] < 0.0:
                want_n = u ** -0.5 * x.beta_moment_neg(0.5)
                assert pi_neg(view, u, 0.0) == pytest.approx(want_n, rel=1e-7)


def test_pi_neg_nonnegative_weight_is_zero(view_u01):
    for u in (0.5, 1.0, 3.0):
        assert pi_neg(view_u01, u, 0.0) == 0.0


def test_pi_neg_rademacher_value(view_rademacher):
    # F(-1/s) = 1/2 exactly when s >= 1, so the integral is half the tail at 1
    assert pi_neg(view_rademacher, 1.0, 0.0) == pytest.approx(0.5, abs=1e-9)
    assert pi_neg(view_rademacher, 1.0, 1e8) < 1e-3


def test_pi_monotonicity(view_u01, view_rademacher):
    us = [0.25, 0.5, 1.0, 2.0]
    vs = [0.0, 0.5, 1.0, 4.0]
    vals_u = [pi_bar(view_u01, u, 0.1) for u in us]
    assert all(b <= a + 1e-12 for a, b in zip(vals_u[:-1], vals_u[1:]))
    vals_v = [pi_bar(view_u01, 1.0, v) for v in vs]
    assert all(b <= a + 1e-12 for a, b in zip(vals_v[:-1], vals_v[1:]))
    neg_u = [pi_neg(view_rademacher, u, 0.0) for u in us]
    assert all(b <= a + 1e-12 for a, b in zip(neg_u[:-1], neg_u[1:]))


def test_pi_consistency_at_origin(stable_half):
    # pi_bar(0+, v) + pi_neg(0+, v) <= lambda_bar(v); equality without an atom at 0
    v = 0.7
    lam = lambda_bar(stable_half, v)
    for kind in ("uniform01", "rademacher"):
        view = BivariateLevyView(make_weight_law(kind), stable_half)
        total = pi_bar(view, 1e-9, v) + pi_neg(view, 1e-9, v)
        assert total <= lam + 1e-9
        assert total == pytest.approx(lam, rel=1e-4)
    view_atom0 = BivariateLevyView(
        make_weight_law("bernoulli", p=0.5, x0=0.0, x1=1.0), stable_half)
    total = pi_bar(view_atom0, 1e-9, v) + pi_neg(view_atom0, 1e-9, v)
    assert total <= lam * (1.0 - 0.5 + 1e-6)


def test_prelimit_pi_point_mass_reduces_to_lambda():
    x = make_weight_law("point_mass", c=1.0)
    y = make_pareto_multiplier(0.5)
    for (u, v) in ((1.0, 0.0), (0.5, 2.0), (2.0, 0.5)):
        est, se = prelimit_pi_n(x, y, 10_000, u, v, SeedStream(3, 1), draws=200_000)
        want = prelimit_lambda_n(y, 10_000, max(u, v))
        assert abs(est - want) <= 3.0 * se + 1e-9


def test_prelimit_pi_matches_limit(view_u01):
    x = make_weight_law("uniform01")
    y = make_pareto_multiplier(0.5)
    est, se = prelimit_pi_n(x, y, 10_000, 1.0, 0.0, SeedStream(3, 2), draws=400_000)
    assert se < 5e-3
    assert abs(est - 2.0 / 3.0) <= 3.0 * se + 1e-9
    # v > u branch against quadrature of the limit
    est2, se2 = prelimit_pi_n(x, y, 10_000, 0.5, 2.0, SeedStream(3, 3), draws=400_000)
    want = pi_bar(view_u01, 0.5, 2.0)
    assert abs(est2 - want) <= 3.0 * se2 + 1e-6


def test_prelimit_pi_negative_branch(stable_half):
    x = make_weight_law("rademacher")
    y = make_pareto_multiplier(0.5)
    view = BivariateLevyView(x, stable_half)
    est, se = prelimit_pi_n(x, y, 10_000, -1.0, 0.0, SeedStream(3, 4), draws=400_000)
    assert abs(est - pi_neg(view, 1.0, 0.0)) <= 3.0 * se + 1e-6


def test_prelimit_pi_variance_reported():
    x = make_weight_law("standard_gaussian")  # unbounded: plain MC path
    y = make_pareto_multiplier(0.5)
    est, se = prelimit_pi_n(x, y, 100, 1.0, 0.0, SeedStream(3, 5), draws=100_000)
    assert se > 0.0


# ---------------------------------------------------------------------------
# Truncated first moment of the jump part
# ---------------------------------------------------------------------------


def test_alpha_h_stable_closed_form(stable_half):
    assert alpha_h(stable_half, 1.0) == pytest.approx(1.0, abs=1e-9)
    for h in (0.25, 1.0, 4.0):
        want = 0.5 * h ** 0.5 / 0.5  # beta h^(1-beta) / (1-beta)
        assert alpha_h(stable_half, h) == pytest.approx(want, rel=1e-8)


def test_alpha_h_monotone_limit_is_drift(stable_half):
    hs = [2.0 ** -k for k in range(12)]
    vals = [alpha_h(stable_half, h) for h in hs]
    assert all(b < a for a, b in zip(vals[:-1], vals[1:]))
    assert vals[-1] < 0.05  # tends to drift_alpha = 0


def test_alpha_h_small_mean_bound(stable_half):
    # integral of z over (0,1] is finite and below alpha at h=1
    assert stable_half.small_mean <= alpha_h(stable_half, 1.0) + 1e-12


def test_alpha_h_prelimit_pareto():
    y = make_pareto_multiplier(0.5)
    for n in (100, 10_000):
        for h in (0.5, 1.0):
            got = alpha_h(y, h, n=n)
            want = (h ** 0.5 - n ** -1.0)  # beta/(1-beta) (h^(1-b) - n^(1-1/b))
            assert got == pytest.approx(want, rel=1e-10)
    # converges to the limit form as n grows
    assert alpha_h(y, 1.0, n=10**8) == pytest.approx(1.0, abs=1e-7)


def test_alpha_h_validation(stable_half):
    with pytest.raises(ParameterError):
        alpha_h(stable_half, 0.0)
    with pytest.raises(ParameterError):
        alpha_h(make_pareto_multiplier(0.5), 1.0)  # missing n


# ---------------------------------------------------------------------------
# Disk-slice functions
# ---------------------------------------------------------------------------


def test_phi_psi_boundary(view_u01):
    phi, psi = phi_psi(view_u01, 1.0, 1.0)  # v = h: radius 0
    assert phi == 0.0  # continuous law: no mass at 0
    assert psi == 0.0
    view_atom0 = BivariateLevyView(
        make_weight_law("bernoulli", p=0.5, x0=0.0, x1=1.0), stable_levy_tail(0.5))
    phi0, _ = phi_psi(view_atom0, 1.0, 1.0)
    assert phi0 == pytest.approx(0.5)  # atom at zero is inside the slice


def test_phi_increases_to_one(view_u01):
    vs = [0.5, 0.1, 0.01, 0.001]
    phis = [phi_psi(view_u01, v, 1.0)[0] for v in vs]
    assert all(b >= a for a, b in zip(phis[:-1], phis[1:]))
    assert phis[-1] == pytest.approx(1.0, abs=1e-6)


def test_psi_over_v_tends_to_mean(view_u01):
    for v in (0.01, 0.001):
        _, psi = phi_psi(view_u01, v, 1.0)
        assert psi / v == pytest.approx(0.5, abs=1e-6)


def test_phi_psi_validation(view_u01):
    with pytest.raises(ParameterError):
        phi_psi(view_u01, 1.5, 1.0)
    with pytest.raises(ParameterError):
        phi_psi(view_u01, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Truncated moments of the bivariate measure
# ---------------------------------------------------------------------------


def test_truncated_first_moments_point_mass(stable_half):
    # X = 1: the slice condition |X| <= varphi(v) becomes v <= h/sqrt(2),
    # so both parts equal beta (h/sqrt(2))^(1-beta) / (1-beta)
    view = BivariateLevyView(make_weight_law("point_mass", c=1.0), stable_half)
    h = 1.0
    want = (h / math.sqrt(2.0)) ** 0.5
    y_part, xy_part = truncated_first_moments(view, h)
    assert y_part == pytest.approx(want, rel=1e-7)
    assert xy_part == pytest.approx(want, rel=1e-7)


def test_truncated_first_moments_symmetric_weight(view_rademacher):
    _, xy_part = truncated_first_moments(view_rademacher, 1.0)
    assert xy_part == pytest.approx(0.0, abs=1e-9)


def test_truncated_first_moments_small_h(view_u01):
    vals = [truncated_first_moments(view_u01, h) for h in (1.0, 0.25, 0.05)]
    ys = [v[0] for v in vals]
    xys = [v[1] for v in vals]
    assert all(b < a for a, b in zip(ys[:-1], ys[1:]))
    assert ys[-1] < 0.3 and abs(xys[-1]) < 0.3  # tend to (drift, drift * EX) = (0, 0)


def test_truncated_first_moments_vs_mc_prelimit(view_u01):
    x = make_weight_law("uniform01")
    y = make_pareto_multiplier(0.5)
    for h in (0.25, 1.0):
        y_lim, xy_lim = truncated_first_moments(view_u01, h)
        (y_pre, y_se), (xy_pre, xy_se) = prelimit_truncated_first_moments(
            x, y, 100_000, h, SeedStream(9, 1), draws=400_000)
        # finite-n defect is O(n/a_n) = O(1e-5) for the Pareto half law
        assert abs(y_lim - y_pre) <= 3.0 * y_se + 1e-4
        assert abs(xy_lim - xy_pre) <= 3.0 * xy_se + 1e-4


def test_truncated_second_moments_inequalities(view_u01):
    h = 1.0
    uu, vv, uv = truncated_second_moments(view_u01, h)
    y_part, _ = truncated_first_moments(view_u01, h)
    assert 0.0 < vv <= h * y_part + 1e-9
    # uu is bounded by h times the absolute-first-moment analogue
    law = view_u01.weight
    dens = view_u01.levy.density
    from selfnorm_lab.distributions import expect_weight
    abs_first = quad(
        lambda v: v * expect_weight(law, lambda t: abs(t),
                                    -math.sqrt(max(h * h - v * v, 0.0)) / v,
                                    math.sqrt(max(h * h - v * v, 0.0)) / v) * dens(v),
        0.0, h, points=[h / math.sqrt(2.0)], limit=200)[0]
    assert 0.0 < uu <= h * abs_first + 1e-9
    assert abs(uv) <= math.sqrt(uu * vv) + 1e-12


def test_truncated_second_moments_vs_mc_prelimit(view_u01):
    # two independent routes: polar-slice quadrature of the limit measure vs
    # the weight-conditional truncated second moment of the multiplier
    x = make_weight_law("uniform01")
    y = make_pareto_multiplier(0.5)
    for h in (0.5, 1.0):
        limits = truncated_second_moments(view_u01, h)
        pres = prelimit_truncated_second_moments(x, y, 100_000, h,
                                                 SeedStream(9, 7), draws=400_000)
        for (lim_val, (pre_val, se)) in zip(limits, pres):
            assert abs(lim_val - pre_val) <= 3.0 * se + 1e-4


def test_second_moment_smallh_scan(view_u01):
    scan = second_moment_smallh_scan(view_u01, k_max=10)
    top = np.asarray(scan[1.0])
    bottom = np.asarray(scan[2.0 ** -10])
    assert np.all(bottom <= 1e-3 * top)
    hs = sorted(scan.keys())
    for a, b in zip(hs[:-1], hs[1:]):
        assert all(x <= y + 1e-15 for x, y in zip(scan[a], scan[b]))


# ---------------------------------------------------------------------------
# Convergence report
# ---------------------------------------------------------------------------


def test_check_levy_convergence_pareto(view_u01):
    x = make_weight_law("uniform01")
    y = make_pareto_multiplier(0.5)
    res = check_levy_convergence(
        x, y, view_u01, n_list=(1_000, 10_000, 100_000),
        v_grid=(0.25, 0.5, 1.0, 2.0, 4.0),
        uv_grid=((0.5, 0.0), (1.0, 0.0), (2.0, 0.0)),
        stream=SeedStream(11, 0), draws=100_000)
    assert res.verdict
    for rep in res.lambda_reports:
        assert rep.sup_abs_gap < 1e-10
    for rep in res.pi_reports:
        assert rep.verdict


def test_check_levy_convergence_slowly_varying_documents_escape():
    x = make_weight_law("uniform01")
    y = make_slowly_varying_multiplier()
    res = check_levy_convergence(x, y, None, n_list=(100, 10_000),
                                 v_grid=(0.25, 1.0, 4.0))
    assert res.verdict
    assert "non-Feller" in res.note
    payload = res.to_json()
    assert "interval_mass" in payload


def test_convergence_report_roundtrip():
    rep = ConvergenceReport.build("demo", [1.0, 2.0], [0.1, 0.2], [0.1, 0.25],
                                  tol=0.1)
    assert rep.sup_abs_gap == pytest.approx(0.05)
    assert rep.gaps == pytest.approx([0.0, 0.05])
    assert rep.verdict
    assert "demo" in rep.to_json()
    assert '"gaps"' in rep.to_json()


def test_quadrature_tolerance_halving(view_u01):
    # halving the requested tolerance moves each value by less than the bound
    for (u, v) in ((1.0, 0.0), (0.5, 0.7)):
        coarse = pi_bar(view_u01, u, v, tol=1e-8)
        fine = pi_bar(view_u01, u, v, tol=5e-9)
        assert abs(coarse - fine) <= 1e-8
    a = alpha_h(stable_levy_tail(0.5), 1.0, tol=1e-8)
    b = alpha_h(stable_levy_tail(0.5), 1.0, tol=5e-9)
    assert abs(a - b) <= 1e-8
