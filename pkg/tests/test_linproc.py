"""Coefficient sums, level windows, and the linear-process ratio curves.

The closed-form window statistics are deterministic, so their values are
frozen at full precision.  The Monte Carlo curves are frozen at a pinned
seed; targets were cross-checked against the marginal closed forms.
"""
import math

import numpy as np
import pytest

from bigjump.conditions import FAIL, INCONCLUSIVE, PASS
from bigjump.dist import LogWeibull, Pareto, TwoSided
from bigjump.errors import (
    InfeasibleError,
    ParameterError,
    UnsupportedCaseError,
)
from bigjump.linproc import (
    GeometricRule,
    check_feb18a,
    check_feb19c,
    coef_stats,
    lambda_window,
    lemma41_ratio,
    prop42_ratio,
    window_regime,
)
from bigjump.procsim import make_iid, make_linear

SEED = 20260817


# ---------------------------------------------------------------------------
# coefficient rules and sums


def test_geometric_rule_validation():
    for bad in (1.0, -1.0, 0.0, 1.5):
        with pytest.raises(ParameterError):
            GeometricRule(ratio=bad)
    with pytest.raises(ParameterError):
        GeometricRule(ratio=0.5, scale=0.0)
    assert "GeometricRule" in repr(GeometricRule(0.5))


def test_geometric_rule_truncate_minimal():
    rule = GeometricRule(0.5, 1.0)
    coeffs, resid = rule.truncate(1e-6)
    # l1 remainder of 0.5^j past index J is 0.5^J; the smallest J under 1e-6
    # is 20, and dropping one term doubles the remainder past the tolerance
    assert coeffs.size == 21
    assert resid == 2.0 ** -20
    assert resid <= 1e-6 < 2.0 * resid
    assert np.array_equal(coeffs, 0.5 ** np.arange(21))
    assert rule.coefficient(3) == 0.125

    # tol=0 falls back to the representable floor instead of looping forever
    coeffs0, resid0 = rule.truncate()
    assert coeffs0.size == 51
    assert resid0 <= 1e-15

    alt = GeometricRule(-0.5, 2.0)
    assert alt.coefficient(2) == 0.5
    coeffs_a, _ = alt.truncate(1e-3)
    assert coeffs_a[1] == -1.0
    assert coeffs_a.size == 12


def test_geometric_rule_delta_norm_tail():
    rule = GeometricRule(0.5, 1.0)
    q = 0.5 ** 0.5
    closed = (1.0 / 0.5) ** 0.5 * q ** 3 / (1.0 - q)
    assert rule.delta_norm_tail(3, 0.5) == pytest.approx(closed, rel=1e-12)
    brute = sum((0.5 ** i / 0.5) ** 0.5 for i in range(3, 400))
    assert rule.delta_norm_tail(3, 0.5) == pytest.approx(brute, rel=1e-9)


def test_coef_stats_finite_vectors():
    c = coef_stats((1.0, 0.5))
    assert c.m0 == 1.5
    assert c.m1 == 0.5
    assert c.m0_prime == 1.5
    assert (c.k_plus, c.k_minus) == (1, 0)
    assert c.order == 1
    assert c.delta_norm == pytest.approx(math.sqrt(0.5), rel=1e-12)

    c = coef_stats((1.0, -1.0, 0.5))
    assert c.m0 == 0.5
    assert c.m1 == 1.5
    assert c.m0_prime == 2.5
    assert (c.k_plus, c.k_minus) == (1, 1)
    assert c.order == 2
    assert c.delta_norm == pytest.approx(
        math.sqrt(1.5) + math.sqrt(0.5), rel=1e-12)


def test_coef_stats_truncated_rule_matches_closed_form():
    # positive geometric coefficients: the finite tail plus the remainder
    # bound reproduces every infinite sum exactly
    rule = GeometricRule(0.5, 2.0)
    c = coef_stats(rule, truncation_tol=1e-6, delta=0.5)
    assert c.m0_prime == pytest.approx(4.0, rel=1e-12)
    assert c.m1 == pytest.approx(2.0, rel=1e-12)
    assert c.m0 == pytest.approx(4.0, rel=1e-5)
    q = 0.5 ** 0.5
    assert c.delta_norm == pytest.approx(
        (2.0 / 0.5) ** 0.5 * q / (1.0 - q), rel=1e-9)
    assert (c.k_plus, c.k_minus) == (1, 0)   # 2 * 0.5^1 is the lone unit
    assert c.order == 21


def test_coef_stats_validation():
    for bad_delta in (0.0, 1.0, -0.5):
        with pytest.raises(ParameterError):
            coef_stats((1.0, 0.5), delta=bad_delta)
    with pytest.raises(ParameterError):
        coef_stats(())
    with pytest.raises(ParameterError):
        coef_stats([[1.0, 0.5]])


# ---------------------------------------------------------------------------
# level windows


def test_window_regime_table():
    assert window_regime("ex44", 1.5) is True
    assert window_regime("ex44", 2.0) is False
    assert window_regime("ex44", 2.5) is False
    assert window_regime("ex45", 1.5, m0=1.0, m0_prime=3.0) is True
    assert window_regime("ex45", 2.0, m0=1.0, m0_prime=2.0) is True
    assert window_regime("ex45", 2.0, m0=1.0, m0_prime=math.e) is False
    assert window_regime("ex45", 2.0, m0=1.0, m0_prime=3.0) is False
    assert window_regime("ex45", 2.5, m0=1.0, m0_prime=1.5) is False
    with pytest.raises(ParameterError):
        window_regime("ex44", 1.0)
    with pytest.raises(ParameterError):
        window_regime("ex45", 2.0)
    with pytest.raises(ParameterError):
        window_regime("ex45", 2.0, m0=0.0, m0_prime=1.0)
    with pytest.raises(ParameterError):
        window_regime("ex45", 2.0, m0=2.0, m0_prime=1.0)
    with pytest.raises(ParameterError):
        window_regime("ex99", 1.5)


def test_lambda_window_ex44_closed_form():
    n, alpha, delta = 2000, 1.5, 0.1
    w = lambda_window("ex44", alpha, n, delta)
    ln, lln = math.log(n), math.log(math.log(n))
    assert w.c_n == pytest.approx(math.sqrt(n * ln ** alpha) * lln, rel=1e-12)
    log_bn = (0.9 * ln / (0.5 * lln)) ** 2
    assert w.params["log_b_n"] == pytest.approx(log_bn, rel=1e-12)
    assert w.b_n == pytest.approx(math.exp(log_bn), rel=1e-12)
    assert w.nonempty and w.regime_nonempty
    d = w.as_dict()
    assert set(d) == {"variant", "alpha", "delta", "c_n", "b_n", "nonempty", "K"}
    assert d["variant"] == "ex44" and d["K"] == 1.0

    for alpha in (2.0, 2.5):
        w = lambda_window("ex44", alpha, n, delta)
        assert w.b_n == 0.0
        assert not w.nonempty and not w.regime_nonempty


def test_lambda_window_ex45():
    # alpha = 2 with a ratio below e: admissible in the limit yet empty at
    # every reachable n, since c_n only loses to b_n = n^0.65 eventually
    w = lambda_window("ex45", 2.0, 1000, 0.1, m0=1.0, m0_prime=2.0)
    assert w.regime_nonempty and not w.nonempty
    assert w.b_n == pytest.approx(
        math.exp(0.9 * math.log(1000) / (2.0 * math.log(2.0))), rel=1e-12)

    # one-signed coefficients: no upper restriction at all
    w = lambda_window("ex45", 1.8, 1000, 0.1, m0=1.5, m0_prime=1.5)
    assert w.b_n == math.inf and w.nonempty

    w = lambda_window("ex45", 1.5, 500, 0.1, m0=1.0, m0_prime=2.0)
    assert w.params["log_b_n"] == pytest.approx(
        (0.9 * math.log(500) / (1.5 * math.log(2.0))) ** 2, rel=1e-12)

    assert lambda_window("ex45", 2.5, 500, 0.1, m0=1.0, m0_prime=2.0).b_n == 0.0
    with pytest.raises(ParameterError):
        lambda_window("ex45", 2.0, 500, 0.1)


def test_lambda_window_validation():
    with pytest.raises(ParameterError):
        lambda_window("ex46", 1.5, 100)
    with pytest.raises(ParameterError):
        lambda_window("ex44", 1.0, 100)
    for bad_delta in (0.0, 1.0):
        with pytest.raises(ParameterError):
            lambda_window("ex44", 1.5, 100, bad_delta)
    with pytest.raises(ParameterError):
        lambda_window("ex44", 1.5, 2)
    with pytest.raises(ParameterError):
        lambda_window("ex44", 1.5, 100, boundary_c=0.0)


# ---------------------------------------------------------------------------
# marginal-tail ratio


def test_lemma41_ratio_frozen():
    noise = TwoSided(LogWeibull(2.0), 0.5, 0.5)
    proc = make_linear((1.0, 0.5), noise)
    xs = np.geomspace(noise.abs_quantile(1 - 1e-2),
                      noise.abs_quantile(1 - 1e-3), 5)
    curve = lemma41_ratio(proc, xs, 4 * 10 ** 5, rng_seed=SEED)
    assert np.allclose(curve.ratio, [1.488, 1.45, 1.422, 1.397, 1.335],
                       atol=6e-4)
    assert curve.extra["front"] == 0.5
    assert curve.estimator == "naive"
    assert curve.target_kind == "linear_pm"
    assert curve.ratio[-1] < curve.ratio[0]
    assert np.allclose(curve.target, 0.5 * noise.abs_tail(xs), rtol=1e-12)
    assert np.all(curve.ci_lo < curve.ratio) and np.all(curve.ratio < curve.ci_hi)
    assert curve.grid.boundary is None and curve.grid.n == 1


def test_lemma41_no_unit_coefficients():
    proc = make_linear((0.7, 0.5), TwoSided(LogWeibull(2.0), 0.5, 0.5))
    curve = lemma41_ratio(proc, [3.0, 4.0], 1000, rng_seed=SEED)
    assert curve.extra["front"] == 0.0
    assert curve.extra["verdict"] == "Inconclusive"
    assert "no unit coefficients" in curve.extra["note"]
    assert np.all(np.isnan(curve.ratio))
    assert np.all(curve.target == 0.0)


def test_lemma41_validation():
    proc = make_linear((1.0, 0.5), TwoSided(LogWeibull(2.0), 0.5, 0.5))
    with pytest.raises(ParameterError):
        lemma41_ratio(proc, [4.0, 3.0], 1000)
    with pytest.raises(ParameterError):
        lemma41_ratio(proc, [], 1000)
    with pytest.raises(UnsupportedCaseError):
        lemma41_ratio(make_iid(Pareto(3.0, 1.0)), [3.0, 4.0], 1000)


# ---------------------------------------------------------------------------
# sum-tail ratio inside the window


def test_prop42_ratio_frozen():
    # at n = 2000 the measured curve sits far above the one-jump limit level
    # 0.5; the numbers are a regression pin, not a closeness claim
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    proc = make_linear((1.0, 0.5), noise)
    w = lambda_window("ex44", 1.5, 2000, 0.1)
    curve = prop42_ratio(proc, 2000, w, 50000, rng_seed=SEED)
    assert curve.ratio.size == 12
    assert np.allclose(
        curve.ratio,
        [27.554, 29.748, 30.931, 31.782, 32.161, 31.563,
         29.521, 26.75, 22.176, 17.02, 13.799, 11.2],
        atol=6e-4)
    assert curve.extra["sup_distance"] == pytest.approx(
        31.661180028955123, rel=1e-12)
    assert curve.extra["sup_distance"] == pytest.approx(
        float(np.max(np.abs(curve.ratio - 0.5))), rel=1e-15)
    assert curve.extra["target_level"] == 0.5
    assert curve.extra["m0"] == 1.5
    assert curve.extra["window"]["variant"] == "ex44"
    assert curve.grid.xs[0] == pytest.approx(415.2, abs=0.05)
    assert curve.grid.xs[-1] == pytest.approx(885.6, abs=0.05)
    assert set(curve.extra) == {"seed", "target_level", "sup_distance",
                                "window", "m0", "coef"}


def test_prop42_negative_m0_rebuilds_window():
    noise = TwoSided(LogWeibull(1.5), 0.6, 0.4)
    proc = make_linear((-1.0,), noise)
    w2000 = lambda_window("ex44", 1.5, 2000, 0.1)
    curve = prop42_ratio(proc, 500, w2000, 20000, rng_seed=SEED, points=3)
    assert curve.extra["target_level"] == 0.4        # mass on the minus side
    assert curve.extra["m0"] == -1.0
    w500 = lambda_window("ex44", 1.5, 500, 0.1)
    assert curve.extra["window"]["c_n"] == pytest.approx(w500.c_n, rel=1e-12)
    assert curve.grid.xs[0] == pytest.approx(w500.c_n * (1 + 1e-9), rel=1e-12)


def test_prop42_errors():
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    w = lambda_window("ex44", 1.5, 2000, 0.1)
    with pytest.raises(UnsupportedCaseError):
        prop42_ratio(make_linear((1.0, -1.0), noise), 2000, w, 10000)
    with pytest.raises(UnsupportedCaseError):
        # negative m0 with one-sided noise: the lower tail carries no mass
        prop42_ratio(make_linear((-1.0,), LogWeibull(1.5)), 2000, w, 10000)
    with pytest.raises(InfeasibleError, match="empty level window"):
        prop42_ratio(make_linear((1.0, 0.5), noise), 2000,
                     lambda_window("ex44", 2.5, 2000, 0.1), 10000)
    with pytest.raises(InfeasibleError, match="window base") as exc:
        prop42_ratio(make_linear((1.0, 0.5), noise), 2000, w, 100)
    p_lo = float(noise.abs_tail(w.c_n * (1 + 1e-9) / 1.5))
    assert exc.value.required_reps == math.ceil(10 / (2000 * p_lo))


# ---------------------------------------------------------------------------
# closed-form window conditions


def test_feb18a_frozen():
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    w = lambda_window("ex44", 1.5, 2000, 0.1)
    coef = coef_stats((1.0, 0.5))
    rep = check_feb18a(noise, None, w, np.geomspace(1e4, 1e7, 9), coef)
    assert rep.verdict == PASS
    assert rep.statistic.size == 9
    assert rep.statistic[0] == pytest.approx(1.17e-3, rel=5e-3)
    assert rep.statistic[-1] == pytest.approx(2.67e-5, rel=5e-3)
    assert np.all(np.diff(rep.statistic) < 0)
    assert "spearman=-1.000" in rep.details
    assert rep.params["threshold"] == 1e-2
    assert rep.params["anchor_c"] == 1.0
    assert rep.params["variant"] == "ex44"
    assert rep.params["label"] == "eps(x)*a(x)"


def test_feb19c_frozen():
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    w = lambda_window("ex44", 1.5, 2000, 0.1)
    coef = coef_stats((1.0, 0.5))
    rep = check_feb19c(noise, None, w, np.geomspace(1e4, 1e7, 9), coef)
    assert rep.verdict == PASS
    assert rep.statistic[0] == pytest.approx(1.06e-4, rel=5e-3)
    assert 0.9e-7 < rep.statistic[-1] < 1.1e-7
    assert np.all(np.diff(rep.statistic) < 0)


def test_feb_vacuous_window_passes():
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    w = lambda_window("ex44", 2.5, 2000, 0.1)
    rep = check_feb18a(noise, None, w, np.geomspace(1e3, 1e5, 8),
                       coef_stats((1.0, 0.5)))
    assert rep.verdict == PASS
    assert rep.statistic.size == 0
    assert "vacuous" in rep.details


def test_feb_partial_window_notes_empties():
    # ratio 1.25/0.75 stays under e, but the finite-n window only opens up
    # around n = 1000: the first grid point contributes no level
    coef = coef_stats((1.0, -0.25))
    noise = TwoSided(LogWeibull(2.0), 0.5, 0.5)
    w = lambda_window("ex45", 2.0, 1000, 0.1, m0=coef.m0,
                      m0_prime=coef.m0_prime)
    rep = check_feb18a(noise, None, w, [100.0, 1000.0, 1e4, 1e5], coef)
    assert rep.details.endswith("window empty at 1 of 4 n-values")
    assert rep.statistic.size == 3
    assert np.array_equal(rep.grid, [1000.0, 1e4, 1e5])
    assert rep.verdict == INCONCLUSIVE       # three points cannot carry a trend


def test_feb_grid_validation_and_custom_g():
    noise = TwoSided(LogWeibull(1.5), 0.5, 0.5)
    w = lambda_window("ex44", 1.5, 2000, 0.1)
    coef = coef_stats((1.0, 0.5))
    with pytest.raises(ParameterError):
        check_feb18a(noise, None, w, [1e5, 1e4], coef)
    rep = check_feb19c(noise, lambda x: np.sqrt(x), w,
                       np.geomspace(1e4, 1e7, 9), coef)
    assert rep.params["label"] == ""
    assert rep.statistic.size == 9
