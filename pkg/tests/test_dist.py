"""Tail families against frozen quadrature values and scipy references.

The frozen constants below were computed independently with
scipy.integrate / mpmath from the defining integrals, not read off the
implementation.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.special import ndtr

from bigjump.dist import (
    Lognormal,
    LognormalScaleMixture,
    LogWeibull,
    Pareto,
    ScaleMixture,
    TwoSided,
    WeibullType,
    insensitivity_ratio,
    mean_excess,
    mean_excess_function,
    squared_model,
    von_mises_reconstruct,
)
from bigjump.errors import ParameterError, UnsupportedCaseError

# quadrature references (independent of the package)
LW2_MEAN = 2.730234433703701          # E X, X = exp(W), W ~ Weibull shape 2
LW2_M2 = 9.878186033256132
LW175_MEAN = 2.859081847596811
LW2_TAIL_INT_3 = 0.4520313610272354   # int_3^inf exp(-(log t)^2) dt
WT05_TAIL_INT_5 = 0.6917284654624256  # int_5^inf exp(-sqrt(t)) dt
LNSM_TAIL_50 = 2.2185558111697965e-05
LN_MEAN_EXCESS_E2 = 19.968635087568103  # Lognormal(0.3, 1.7) at x = e^2


def models():
    return st.one_of(
        st.builds(Pareto, st.floats(0.5, 8.0), st.floats(0.1, 5.0)),
        st.builds(Lognormal, st.floats(-1.0, 1.0), st.floats(0.3, 3.0)),
        st.builds(LogWeibull, st.floats(1.1, 3.0), st.floats(0.3, 4.0)),
        st.builds(WeibullType, st.floats(0.15, 0.9)),
    )


@settings(max_examples=80, deadline=None)
@given(models(), st.floats(1e-6, 1.0 - 1e-6))
def test_quantile_inverts_tail(model, u):
    x = model.quantile(u)
    assert model.tail(x) == pytest.approx(1.0 - u, rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(models(), st.floats(0.01, 0.98), st.floats(1e-4, 0.5))
def test_tail_monotone(model, u, step):
    x = model.quantile(u)
    assert model.tail(x + step) <= model.tail(x) + 1e-15


@settings(max_examples=60, deadline=None)
@given(models(), st.floats(0.2, 1.0 - 1e-9))
def test_hazard_integral_is_log_tail(model, u):
    x = model.quantile(u)
    t = model.tail(x)
    if t > 0:
        assert model.hazard_integral(x) == pytest.approx(-math.log(t), rel=1e-10, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(models(), st.floats(0.3, 1.0 - 1e-7))
def test_squared_model_identity(model, u):
    sq = squared_model(model)
    x = model.quantile(u)
    assert sq.tail(x * x) == pytest.approx(model.abs_tail(x), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 8.0), st.floats(0.1, 5.0), st.floats(0.05, 0.95),
       st.floats(1e-5, 1.0 - 1e-5))
def test_two_sided_piecewise(alpha, x_m, p_plus, u):
    base = Pareto(alpha, x_m)
    m = TwoSided(base, p_plus, 1.0 - p_plus)
    x = base.quantile(0.5)
    assert m.tail(x) == pytest.approx(p_plus * base.tail(x), rel=1e-12)
    assert m.abs_tail(x) == base.tail(x)
    # quantile inverts the cdf on both branches of the sign split
    q = m.quantile(u)
    assert m.tail(q) == pytest.approx(1.0 - u, rel=1e-8)


def test_pareto_closed_forms():
    m = Pareto(3.0, 2.0)
    assert m.tail(4.0) == pytest.approx(0.125, rel=1e-14)
    assert m.tail(1.0) == 1.0  # below support
    assert m.mean == pytest.approx(3.0, rel=1e-14)
    assert m.variance == pytest.approx(3.0, rel=1e-14)  # alpha a/(a-2) x^2 - mu^2
    assert m.moment(3) == math.inf
    assert m.moment(4) == math.inf
    assert m.tail_integral(4.0) == pytest.approx(4.0 * 0.125 / 2.0, rel=1e-14)
    # below the support the overshoot integral picks up the gap
    assert m.tail_integral(1.0) == pytest.approx((2.0 - 1.0) + 2.0 / 2.0, rel=1e-14)
    assert m.tail_index == 3.0


def test_lognormal_matches_scipy():
    m = Lognormal(0.3, 1.7)
    ref = sps.lognorm(s=1.7, scale=math.exp(0.3))
    xs = np.array([0.1, 1.0, 5.0, 40.0, 2000.0])
    assert np.allclose(m.tail(xs), ref.sf(xs), rtol=1e-12)
    assert m.quantile(0.99) == pytest.approx(ref.ppf(0.99), rel=1e-12)
    assert m.moment(2) == pytest.approx(math.exp(2 * 0.3 + 2 * 1.7 ** 2), rel=1e-12)
    assert m.mean_excess_exact(math.e ** 2) == pytest.approx(LN_MEAN_EXCESS_E2, rel=1e-9)


def test_logweibull_frozen_moments():
    lw2 = LogWeibull(2.0)
    assert lw2.mean == pytest.approx(LW2_MEAN, rel=1e-9)
    assert lw2.moment(2) == pytest.approx(LW2_M2, rel=1e-9)
    assert LogWeibull(1.75).mean == pytest.approx(LW175_MEAN, rel=1e-9)
    # closed form for the same integral: 1 + e^{1/4} sqrt(pi)/2 erfc(-1/2)
    closed = 1.0 + math.exp(0.25) * math.sqrt(math.pi) / 2.0 * math.erfc(-0.5)
    assert lw2.mean == pytest.approx(closed, rel=1e-10)
    assert lw2.tail_integral(3.0) == pytest.approx(LW2_TAIL_INT_3, rel=1e-8)
    assert lw2.tail(math.e) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert lw2.tail(0.5) == 1.0


def test_weibull_type_closed_forms():
    wt = WeibullType(0.5)
    assert wt.tail(4.0) == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert wt.moment(1) == pytest.approx(math.gamma(3.0), rel=1e-12)
    assert wt.moment(2) == pytest.approx(math.gamma(5.0), rel=1e-12)
    assert wt.tail_integral(5.0) == pytest.approx(WT05_TAIL_INT_5, rel=1e-9)


def test_weibull_type_tail_integral_branch_seam():
    # Gamma(2, z) = (1 + z) e^{-z}, so int_x^inf exp(-sqrt t) dt = 2 (1+z) e^{-z}
    # at x = z^2; check both the gammaincc branch and the asymptotic branch.
    wt = WeibullType(0.5)
    for z in (599.0, 601.0):
        exact = 2.0 * (1.0 + z) * math.exp(-z)
        assert wt.tail_integral(z * z) == pytest.approx(exact, rel=1e-6)


def test_two_sided_moments_and_support():
    m = TwoSided(Pareto(4.5, 1.0), 0.5, 0.5)
    assert m.mean == 0.0
    assert m.variance == pytest.approx(4.5 / 2.5, rel=1e-12)
    assert m.moment(3) == 0.0
    asym = TwoSided(Pareto(4.5, 1.0), 0.7, 0.3)
    assert asym.moment(1) == pytest.approx(0.4 * 4.5 / 3.5, rel=1e-12)
    assert m.support_left == -math.inf
    assert TwoSided(Pareto(4.5, 1.0), 1.0, 0.0).support_left == 1.0
    # negative-side quantile
    assert m.quantile(0.1) == pytest.approx(-m.base.quantile(1.0 - 0.1 / 0.5), rel=1e-12)


def test_two_sided_validation():
    with pytest.raises(ParameterError):
        TwoSided(Pareto(3.0, 1.0), 0.6, 0.6)
    with pytest.raises(ParameterError):
        TwoSided(Pareto(3.0, 1.0), 0.0, 1.0)
    with pytest.raises(ParameterError):
        TwoSided(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5), 0.5, 0.5)  # signed base


def test_parameter_validation():
    for bad in (lambda: Pareto(0.0, 1.0), lambda: Pareto(3.0, -1.0),
                lambda: Lognormal(0.0, 0.0), lambda: LogWeibull(1.0),
                lambda: LogWeibull(2.0, 0.0), lambda: WeibullType(1.0),
                lambda: WeibullType(0.0)):
        with pytest.raises(ParameterError):
            bad()
    m = Pareto(3.0, 1.0)
    for u in (0.0, 1.0, -0.2, 1.2):
        with pytest.raises(ParameterError):
            m.quantile(u)


def test_sampling_matches_tail():
    rng = np.random.default_rng(11)
    n = 20000
    crit = 1.95 / math.sqrt(n)  # KS 0.001 level, fixed seeds
    cases = [
        Pareto(2.5, 1.3),
        Lognormal(0.2, 1.1),
        LogWeibull(1.75, 0.8),
        WeibullType(0.4),
        TwoSided(Pareto(3.0, 1.0), 0.6, 0.4),
        ScaleMixture(Pareto(3.0, 1.0), (1.0, 2.0), (0.7, 0.3)),
    ]
    for m in cases:
        xs = np.sort(m.sample(rng, n))
        cdf = 1.0 - m.tail(xs)
        d = np.max(np.maximum(cdf - np.arange(n) / n, np.arange(1, n + 1) / n - cdf))
        assert d < crit, m


def test_scale_mixture_formulas():
    base = Pareto(3.0, 1.0)
    m = ScaleMixture(base, (1.0, 2.0), (0.7, 0.3))
    x = 5.0
    assert m.tail(x) == pytest.approx(0.7 * base.tail(x) + 0.3 * base.tail(x / 2), rel=1e-14)
    assert m.moment(2) == pytest.approx((0.7 + 0.3 * 4.0) * base.moment(2), rel=1e-12)
    assert m.tail_index == 3.0
    with pytest.raises(ParameterError):
        ScaleMixture(base, (1.0, 2.0), (0.7, 0.4))


def test_lognormal_scale_mixture_tail():
    m = LognormalScaleMixture(Pareto(3.0, 1.0), 0.1, 0.4)
    assert m.tail(50.0) == pytest.approx(LNSM_TAIL_50, rel=1e-9)
    assert m.sigma_moment(3) == pytest.approx(math.exp(0.3 + (1.2 ** 2) / 2), rel=1e-12)
    assert m.moment(2) == pytest.approx(
        math.exp(0.2 + (0.8 ** 2) / 2) * Pareto(3.0, 1.0).moment(2), rel=1e-12)


def test_squared_model_family_mapping():
    assert isinstance(squared_model(Pareto(4.5, 1.2)), Pareto)
    sq = squared_model(Pareto(4.5, 1.2))
    assert sq.alpha == pytest.approx(2.25) and sq.x_m == pytest.approx(1.44)
    assert isinstance(squared_model(Lognormal(0.1, 0.9)), Lognormal)
    assert isinstance(squared_model(LogWeibull(2.0, 1.0)), LogWeibull)
    assert isinstance(squared_model(WeibullType(0.5)), WeibullType)
    assert isinstance(squared_model(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5)), Pareto)
    sq = squared_model(LogWeibull(2.0, 1.0))
    assert sq.scale == pytest.approx(1.0 / 4.0)
    with pytest.raises(UnsupportedCaseError):
        squared_model(ScaleMixture(Pareto(3.0, 1.0), (1.0, 2.0), (0.5, 0.5)))


def test_mean_excess():
    # Pareto: a(x) = x / (alpha - 1) exactly on the support
    assert mean_excess(Pareto(3.0, 2.0), 5.0) == pytest.approx(2.5, rel=1e-12)
    wt = WeibullType(0.5)
    assert mean_excess(wt, 5.0) == pytest.approx(
        WT05_TAIL_INT_5 / math.exp(-math.sqrt(5.0)), rel=1e-9)
    ln = Lognormal(0.3, 1.7)
    assert mean_excess(ln, math.e ** 2) == pytest.approx(LN_MEAN_EXCESS_E2, rel=1e-9)
    with pytest.raises(ParameterError):
        mean_excess(Pareto(3.0, 1.0), 1e200)  # tail underflows to zero


def test_mean_excess_function_provenance():
    assert mean_excess_function(Pareto(3.0, 1.0)).provenance == "closed_form"
    assert mean_excess_function(Lognormal(0.0, 1.0)).provenance == "closed_form"
    assert mean_excess_function(LogWeibull(2.0)).provenance == "numeric_integral"
    a = mean_excess_function(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5))
    assert a.provenance == "closed_form"
    assert a.label == "mean_excess"
    assert a(5.0) == pytest.approx(2.5, rel=1e-12)


def test_insensitivity_ratio():
    m = Pareto(3.0, 1.0)
    g = lambda x: np.ones_like(np.asarray(x, dtype=float))
    x = 10.0
    assert insensitivity_ratio(m, g, 2.0, x) == pytest.approx((0.8) ** -3.0, rel=1e-12)
    with pytest.raises(ParameterError):
        insensitivity_ratio(m, lambda x: x, 1.0, 5.0)  # shift hits the support


def test_von_mises_reconstruct():
    ln = Lognormal(0.0, 1.0)
    a = mean_excess_function(ln)
    xs = np.geomspace(3.0, 20.0, 24)
    c = von_mises_reconstruct(ln, a, 2.5, xs)
    # the right auxiliary function settles the profile: successive steps
    # shrink to a few percent while the level drifts only logarithmically
    assert np.all(c > 0)
    assert abs(c[-1] / c[-2] - 1.0) < 0.08
    assert 0.2 < c[-1] / c[0] < 1.0
    assert abs(c[-1] / c[-2] - 1.0) < abs(c[1] / c[0] - 1.0)
    # a wrong (constant) auxiliary makes it blow up instead
    bad = von_mises_reconstruct(ln, lambda x: np.ones_like(np.asarray(x, float)),
                                2.5, xs)
    assert bad[-1] / bad[0] > 1e3
    assert np.all(np.diff(bad) > 0)
