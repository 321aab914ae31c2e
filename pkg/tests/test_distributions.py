import math

import numpy as np
import pytest
from scipy.integrate import quad

from selfnorm_lab.distributions import (
    ParameterError,
    SeedStream,
    expect_weight,
    levy_cdf,
    make_finite_mean_multiplier,
    make_pareto_multiplier,
    make_slowly_varying_multiplier,
    make_weight_law,
    sample_positive_stable,
)

DKW_BAND_1E6 = math.sqrt(math.log(2.0 / 0.001) / (2.0 * 1_000_000))  # 99.9% band


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------


def test_seed_stream_is_pure():
    a = SeedStream(42, 7).generator().random(100)
    b = SeedStream(42, 7).generator().random(100)
    assert np.array_equal(a, b)


def test_seed_stream_independent_indices():
    a = SeedStream(42, 0).generator().random(100)
    b = SeedStream(42, 1).generator().random(100)
    assert not np.array_equal(a, b)


def test_seed_stream_child_distinct():
    s = SeedStream(42, 3)
    assert s.child(0) != s.child(1)
    assert s.child(5) == s.child(5)


def test_seed_stream_validation():
    with pytest.raises(ParameterError):
        SeedStream(-1)
    with pytest.raises(ParameterError):
        SeedStream(1, -2)


# ---------------------------------------------------------------------------
# Pareto multiplier
# ---------------------------------------------------------------------------


def test_pareto_survival_values():
    y = make_pareto_multiplier(0.5)
    assert y.survival(4.0) == pytest.approx(0.5)
    assert y.survival(1.0) == 1.0
    assert y.survival(0.3) == 1.0


def test_pareto_norming_is_quantile():
    y = make_pareto_multiplier(0.5)
    assert y.norming(100) == pytest.approx(10_000.0)
    ns = [1, 2, 10, 100, 10_000]
    a = [y.norming(n) for n in ns]
    assert all(b >= c for b, c in zip(a[1:], a[:-1]))


def test_pareto_row_tail_identity_machine_precision():
    y = make_pareto_multiplier(0.5)
    for n in (2, 10, 1_000, 100_000):
        for v in (0.25, 0.5, 1.0, 2.0, 4.0):
            if y.norming(n) * v >= 1.0:
                val = n * y.survival(y.norming(n) * v)
                assert val == pytest.approx(v ** -0.5, rel=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8, 1.0, 1.5])
def test_pareto_truncated_moments_match_quadrature(beta):
    y = make_pareto_multiplier(beta)
    dens = lambda t: beta * t ** (-beta - 1.0)
    for x in (1.5, 4.0, 50.0):
        assert y.trunc_mean(x) == pytest.approx(
            quad(lambda t: t * dens(t), 1.0, x)[0], rel=1e-9)
        assert y.trunc_second(x) == pytest.approx(
            quad(lambda t: t * t * dens(t), 1.0, x)[0], rel=1e-9)


def test_pareto_rejects_bad_beta():
    for bad in (0.0, -0.5, 2.0, 2.5):
        with pytest.raises(ParameterError):
            make_pareto_multiplier(bad)


# ---------------------------------------------------------------------------
# Slowly varying multiplier
# ---------------------------------------------------------------------------


def test_slowly_varying_survival_values():
    y = make_slowly_varying_multiplier()
    assert y.survival(math.e) == 1.0
    assert y.survival(math.e ** 2) == pytest.approx(0.5)


def test_slowly_varying_truncated_moments_match_quadrature():
    y = make_slowly_varying_multiplier()
    dens = lambda t: 1.0 / (t * math.log(t) ** 2)
    for x in (10.0, 1e3, 1e6):
        assert y.trunc_mean(x) == pytest.approx(
            quad(lambda t: t * dens(t), math.e, x, limit=200)[0], rel=1e-8)
        assert y.trunc_second(x) == pytest.approx(
            quad(lambda t: t * t * dens(t), math.e, x, limit=200)[0], rel=1e-8)


def test_slowly_varying_tail_dominates_truncated_second_moment():
    # x^2 survival(x) / trunc_second(x) grows without bound along x = 10^k
    y = make_slowly_varying_multiplier()
    vals = [x * x * y.survival(x) / y.trunc_second(x) for x in 10.0 ** np.arange(2, 9)]
    assert all(b > a for a, b in zip(vals[:-1], vals[1:]))
    assert vals[-1] > vals[0] * 3


def test_slowly_varying_log_sampler_consistent():
    y = make_slowly_varying_multiplier()
    s = SeedStream(5, 1)
    logs = y.log_sampler(s, 1000)
    raw = y.sampler(s, 1000)
    finite = np.isfinite(raw)
    assert np.allclose(np.exp(logs[finite]), raw[finite], rtol=1e-12)
    assert np.all(logs >= 1.0)


# ---------------------------------------------------------------------------
# Finite-mean multipliers
# ---------------------------------------------------------------------------


def test_exponential_basics():
    y = make_finite_mean_multiplier("exponential", rate=1.0)
    assert y.mean == 1.0
    assert y.survival(0.0) == 1.0
    assert y.trunc_mean(math.inf if False else 1e3) == pytest.approx(1.0, rel=1e-10)


def test_uniform01_trunc_second():
    y = make_finite_mean_multiplier("uniform01")
    assert y.trunc_second(1.0) == pytest.approx(1.0 / 3.0)
    assert y.trunc_mean(0.5) == pytest.approx(0.125)


def test_finite_mean_norming_grows():
    for y in (make_finite_mean_multiplier("exponential", rate=2.0),
              make_finite_mean_multiplier("uniform01")):
        a = [y.norming(n) for n in (1, 10, 100, 10_000)]
        assert all(b > c for b, c in zip(a[1:], a[:-1]))
        assert a[-1] > 100.0


def test_trunc_second_bounded_by_x_trunc_mean():
    laws = [make_pareto_multiplier(0.5), make_slowly_varying_multiplier(),
            make_finite_mean_multiplier("exponential", rate=1.0),
            make_finite_mean_multiplier("uniform01")]
    for y in laws:
        for x in (0.5, 2.0, 10.0, 1e4):
            assert y.trunc_second(x) <= x * y.trunc_mean(x) + 1e-12


def test_finite_mean_rejects_bad_rate():
    with pytest.raises(ParameterError):
        make_finite_mean_multiplier("exponential", rate=0.0)


@pytest.mark.parametrize("maker,args", [
    (make_pareto_multiplier, (0.5,)),
    (make_slowly_varying_multiplier, ()),
    (make_finite_mean_multiplier, ("exponential",)),
    (make_finite_mean_multiplier, ("uniform01",)),
])
def test_empirical_survival_within_dkw_band(maker, args):
    y = maker(*args)
    draws = y.sampler(SeedStream(2024, 11), 1_000_000)
    draws = np.sort(draws)
    grid = np.quantile(draws[np.isfinite(draws)], np.linspace(0.001, 0.999, 200))
    emp = 1.0 - np.searchsorted(draws, grid, side="right") / len(draws)
    ana = np.asarray([y.survival(g) for g in grid])
    assert np.max(np.abs(emp - ana)) <= DKW_BAND_1E6


# ---------------------------------------------------------------------------
# Weight laws
# ---------------------------------------------------------------------------


def test_uniform01_beta_moment():
    x = make_weight_law("uniform01")
    assert x.beta_moment_pos(0.5) == pytest.approx(2.0 / 3.0)
    assert x.beta_moment_neg(0.5) == 0.0


def test_rademacher_atoms():
    x = make_weight_law("rademacher")
    assert x.mean == 0.0
    assert x.atoms == ((-1.0, 0.5), (1.0, 0.5))
    assert x.beta_moment_pos(0.77) == pytest.approx(0.5)


def test_point_mass_moments():
    x = make_weight_law("point_mass", c=1.0)
    for b in (0.1, 0.5, 1.3):
        assert x.beta_moment_pos(b) == pytest.approx(1.0)
    assert x.degenerate


def test_gaussian_beta_moment_matches_quadrature():
    x = make_weight_law("standard_gaussian")
    for b in (0.5, 1.0, 1.7):
        oracle = quad(lambda t: t ** b * math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi),
                      0, np.inf)[0]
        assert x.beta_moment_pos(b) == pytest.approx(oracle, rel=1e-9)


def test_symmetric_pareto_infinite_mean_flags():
    x = make_weight_law("symmetric_pareto", gamma=0.8)
    assert math.isinf(x.abs_mean)
    assert not x.degenerate
    assert x.beta_moment_pos(0.5) == pytest.approx(0.8 / (2 * 0.3))
    assert math.isinf(x.beta_moment_pos(0.9))
    x2 = make_weight_law("symmetric_pareto", gamma=1.5)
    assert x2.abs_mean == pytest.approx(3.0)
    assert x2.mean == 0.0


def test_cdf_jump_equals_atom_mass():
    for kind, kwargs in (("rademacher", {}), ("point_mass", {"c": 2.0}),
                         ("bernoulli", {"p": 0.3, "x0": -1.0, "x1": 5.0})):
        x = make_weight_law(kind, **kwargs)
        for loc, m in x.atoms:
            jump = x.cdf(loc) - x.cdf(loc - 1e-9)
            assert jump == pytest.approx(m, abs=1e-12)


def test_cdf_monotone_with_limits():
    spans = {"uniform01": 50.0, "standard_gaussian": 50.0, "rademacher": 50.0,
             "symmetric_pareto": 1e5}
    for kind, span in spans.items():
        x = make_weight_law(kind, gamma=0.8)
        grid = np.concatenate([np.linspace(-span, span, 401),
                               np.linspace(-2.0, 2.0, 201)])
        grid.sort()
        vals = np.asarray([float(x.cdf(t)) for t in grid])
        assert np.all(np.diff(vals) >= -1e-15)
        assert vals[0] <= 0.01 and vals[-1] >= 0.99


@pytest.mark.parametrize("kind,kwargs,var_known", [
    ("uniform01", {}, True),
    ("standard_gaussian", {}, True),
    ("rademacher", {}, True),
    ("bernoulli", {"p": 0.25, "x0": 0.0, "x1": 1.0}, True),
])
def test_empirical_mean_within_five_se(kind, kwargs, var_known):
    x = make_weight_law(kind, **kwargs)
    draws = x.sampler(SeedStream(99, 5), 1_000_000)
    se = draws.std(ddof=1) / 1000.0
    assert abs(draws.mean() - x.mean) <= 5.0 * max(se, 1e-9)


def test_weight_law_validation():
    with pytest.raises(ParameterError):
        make_weight_law("bernoulli", p=1.5)
    with pytest.raises(ParameterError):
        make_weight_law("symmetric_pareto", gamma=2.5)
    with pytest.raises(ParameterError):
        make_weight_law("no_such_kind")


def test_expect_weight_mixes_atoms_and_density():
    x = make_weight_law("uniform01")
    assert expect_weight(x, lambda t: t) == pytest.approx(0.5, abs=1e-10)
    r = make_weight_law("rademacher")
    assert expect_weight(r, lambda t: t * t) == pytest.approx(1.0)
    assert expect_weight(r, lambda t: t, lo=-1.0, hi=1.0, include_lo=False) == \
        pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Positive stable sampler
# ---------------------------------------------------------------------------


def test_positive_stable_strictly_positive():
    z = sample_positive_stable(0.7, SeedStream(1, 0), 10_000)
    assert np.all(z > 0.0)


def test_positive_stable_half_matches_levy_closed_form():
    z = np.sort(sample_positive_stable(0.5, SeedStream(7, 3), 200_000))
    f = levy_cdf(z, 0.5)
    i = np.arange(1, len(z) + 1)
    ks = max(np.max(i / len(z) - f), np.max(f - (i - 1) / len(z)))
    assert ks <= 1.63 / math.sqrt(len(z))  # 99% Kolmogorov critical value


def test_positive_stable_median_spot_check():
    # Levy(0, 1/2) median solves 2(1 - Phi(1/sqrt(2 z))) = 1/2
    from scipy.stats import norm
    target = 1.0 / (2.0 * norm.ppf(0.75) ** 2)
    z = sample_positive_stable(0.5, SeedStream(7, 4), 400_000)
    assert np.median(z) == pytest.approx(target, rel=0.02)


def test_positive_stable_tail_constant():
    # P{Z > z} ~ z^-beta / Gamma(1 - beta); probe where survival is ~1e-3.
    # 4e6 draws keep the 5% tolerance near two standard errors.
    beta = 0.5
    zq = (1e3 * math.gamma(1.0 - beta)) ** (1.0 / beta)
    z = sample_positive_stable(beta, SeedStream(7, 5), 4_000_000)
    emp = float((z > zq).mean())
    asym = zq ** (-beta) / math.gamma(1.0 - beta)
    assert abs(emp - asym) <= 0.05 * asym


@pytest.mark.parametrize("beta", [0.3, 0.7])
def test_positive_stable_laplace_transform(beta):
    z = sample_positive_stable(beta, SeedStream(7, int(beta * 10)), 1_000_000)
    for lam in (0.5, 1.0, 2.0):
        vals = np.exp(-lam * z)
        se = vals.std(ddof=1) / 1000.0
        assert abs(vals.mean() - math.exp(-lam ** beta)) <= 4.0 * se


def test_positive_stable_validation():
    with pytest.raises(ParameterError):
        sample_positive_stable(1.0, SeedStream(1), 10)
    with pytest.raises(ParameterError):
        sample_positive_stable(0.5, SeedStream(1), 0)
