"""Verdict logic of the deterministic and Monte Carlo condition checkers."""
import math

import numpy as np
import pytest

from bigjump.conditions import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    GFunction,
    bojanic_seneta,
    boundary_catalogue,
    check_C1,
    check_C2_ratio,
    check_RV1,
    check_RV2,
    check_iid_LD,
    default_g,
    estimate_C3,
    lemma21_check,
    tail_dependence_lag,
)
from bigjump.dist import Lognormal, LogWeibull, Pareto, TwoSided
from bigjump.errors import (
    NumericFailureError,
    ParameterError,
    UnsupportedCaseError,
)
from bigjump.procsim import make_clipped_iid, make_comonotone, make_iid

SEED = 20260817
IDENTITY = GFunction(g=lambda x: np.asarray(x, dtype=float), label="x")


def test_boundary_catalogue():
    b = boundary_catalogue("nagaev_rv", {"alpha": 4.0})
    assert b(100) == pytest.approx(math.sqrt(2 * 100 * math.log(100)), rel=1e-12)
    assert b.regime == "nagaev_rv"
    assert boundary_catalogue("lognormal_ln")(100) == pytest.approx(
        10 * math.log(100), rel=1e-12)
    r = boundary_catalogue("rozovski", {"alpha": 0.5})
    assert r(100) == pytest.approx(10 * math.log(100) ** 3, rel=1e-12)
    r = boundary_catalogue("rozovski", {"alpha": 1.5})
    assert r(100) == pytest.approx(10 * math.log(100) ** (2 / 3), rel=1e-12)
    b = boundary_catalogue("custom", {"t": lambda n: 7.0 * n})
    assert b(3) == 21.0
    for bad in (("nagaev_rv", {"alpha": 2.0}), ("rozovski", {"alpha": 2.0}),
                ("custom", {}), ("no_such", {})):
        with pytest.raises(ParameterError):
            boundary_catalogue(*bad)


def test_check_c1():
    m = Pareto(3.0, 1.0)
    # grid starts above e: x / S(x) dips below that, and the nondecreasing
    # check on g is part of the verdict
    xs = np.geomspace(3.0, 100.0, 12)
    rep = check_C1(default_g(m), m, xs, 1.0)
    # g = x/S makes the statistic identically one
    assert rep.verdict == PASS
    assert np.allclose(rep.statistic, 1.0, rtol=1e-12)
    assert rep.condition_id == "C1"
    assert check_C1(default_g(m), m, xs, 0.2).verdict == FAIL
    rep = check_C1(GFunction(g=lambda x: 2.0 * np.asarray(x, float), label="2x"),
                   m, xs, 1.0)
    assert rep.verdict == FAIL
    assert "warning: g(x) >= x" in rep.details
    rep = check_C1(default_g(m), m, np.geomspace(2.0, 100.0, 12), 1.0)
    assert rep.verdict == FAIL
    assert "g nondecreasing: False" in rep.details


def test_check_c2_negative_control():
    # the stretched-exponential family has a scale-invariant hazard ratio:
    # the statistic will not decay however far out the boundary moves
    from bigjump.dist import WeibullType

    model = WeibullType(0.5)
    b = boundary_catalogue("nagaev_rv", {"alpha": 3.0})
    rep = check_C2_ratio(default_g(model), model, b,
                         [100.0 * 2 ** k for k in range(10)])
    assert rep.verdict == FAIL
    assert np.max(rep.statistic) - np.min(rep.statistic) < 1e-3  # flat, no decay
    assert rep.statistic[0] > 1.0
    assert rep.companion.condition_id == "C2b"
    assert rep.companion.verdict == FAIL  # g(t_n)/sqrt(n) shrinks instead


def test_check_c2_positive_trend():
    # log-Weibull hazards are insensitive to g = x/S, but the convergence is
    # logarithmic: verdict stays inconclusive at reachable n with a clean
    # decreasing trend.  The companion is honest too: g(t_n)/sqrt(n) behaves
    # like 4/log n for this family under the sqrt(n)*log(n) boundary, so the
    # divergence check fails rather than being papered over.
    model = LogWeibull(2.0)
    b = boundary_catalogue("lognormal_ln")
    rep = check_C2_ratio(default_g(model), model, b, np.geomspace(20, 800, 10))
    assert rep.verdict == INCONCLUSIVE
    assert rep.statistic.size == 10
    assert np.all(np.diff(rep.statistic) < 0)
    assert rep.companion.verdict == FAIL
    assert np.all(np.diff(rep.companion.statistic) < 0)


def test_check_c2_empty_grid():
    model = LogWeibull(2.0)
    b = boundary_catalogue("lognormal_ln")
    rep = check_C2_ratio(default_g(model), model, b,
                         np.geomspace(1e5, 1e7, 8))
    assert rep.verdict == INCONCLUSIVE
    assert "empty x-grid at every n" in rep.details
    with pytest.raises(ParameterError):
        check_C2_ratio(default_g(model), model, b, [100.0, 200.0], delta=0.0)


def test_bojanic_seneta_verdicts():
    lw2 = LogWeibull(2.0)
    xs = np.geomspace(math.e ** 2, math.e ** 600, 32)
    rep = bojanic_seneta(lw2.hazard_integral, xs)
    assert rep.verdict == PASS
    assert abs(rep.statistic[-1]) < 0.05
    assert rep.condition_id == "BojanicSeneta"
    # S(x) = sqrt(x) is not slowly varying: statistic grows like log(x)/4
    rep = bojanic_seneta(lambda x: np.sqrt(np.asarray(x, float)),
                         np.geomspace(math.e ** 4, math.e ** 100, 16))
    assert rep.verdict == FAIL
    assert rep.statistic[-1] == pytest.approx(25.0, rel=1e-3)


def test_bojanic_seneta_errors():
    with pytest.raises(ParameterError):
        bojanic_seneta(lambda x: np.log(np.asarray(x, float)) - 3.0,
                       np.array([2.0, 10.0, 20.0]))
    # central log-step exits the domain -> non-finite difference quotient
    with np.errstate(invalid="ignore"), pytest.raises(NumericFailureError):
        bojanic_seneta(lambda x: np.sqrt(100.0 - np.log(np.asarray(x, float))),
                       np.array([math.exp(50.0), math.exp(99.99999)]))


def test_lemma21():
    lw2 = LogWeibull(2.0)
    b = boundary_catalogue("lognormal_ln")
    rep = lemma21_check(lw2, default_g(lw2), b, np.geomspace(100, 1e6, 9))
    assert rep.verdict == PASS
    assert rep.statistic[-1] < 1e-3
    assert rep.condition_id == "Lemma21"
    with pytest.raises(ParameterError):
        lemma21_check(lw2, default_g(lw2), b, np.geomspace(100, 1e6, 9), eps=0.0)
    zero = boundary_catalogue("custom", {"t": lambda n: 0.0})
    with pytest.raises(ParameterError):
        lemma21_check(lw2, default_g(lw2), zero, np.geomspace(100, 1e6, 9))


def test_check_rv1():
    m = Pareto(3.0, 1.0)
    xs = np.geomspace(2.0, 50.0, 12)
    rep = check_RV1(m, xs)
    assert rep.verdict == PASS
    assert np.max(rep.statistic) < 1e-10  # exact power tail
    assert check_RV1(TwoSided(m, 0.5, 0.5), xs).verdict == PASS
    rep = check_RV1(Lognormal(0.0, 1.0), xs)
    assert rep.verdict == INCONCLUSIVE
    assert np.all(np.isnan(rep.statistic))


def test_check_rv2():
    m = TwoSided(Pareto(3.0, 1.0), 0.6, 0.4)
    xs = np.geomspace(2.0, 50.0, 12)
    rep = check_RV2(m, xs)
    assert rep.verdict == PASS
    assert np.max(rep.statistic) < 1e-12
    assert rep.params["p_plus"] == 0.6


def test_check_iid_ld_flags_boundary_violation():
    # at delta = 1 and small n the single-jump ratio is still far above one;
    # the checker must reject, not shrug
    m = TwoSided(Pareto(3.0, 0.45), 0.5, 0.5)
    b = boundary_catalogue("nagaev_rv", {"alpha": 3.0})
    rep = check_iid_LD(m, 50, b, delta=1.0, reps=50000, rng_seed=SEED)
    assert rep.verdict == FAIL
    assert rep.statistic[0] > 5.0
    assert "CI misses the band" in rep.details
    assert rep.condition_id == "C2-iidLD"
    with pytest.raises(ParameterError):
        check_iid_LD(m, 50, b, reps=5000, rng_seed=SEED)


def test_estimate_c3_iid_passes():
    proc = make_iid(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5))
    xs = np.geomspace(3.0, 15.0, 9)
    rep = estimate_C3(proc, IDENTITY, 1.0, xs, 10 ** 6, rng_seed=SEED)
    assert rep.verdict == PASS
    assert rep.statistic[-1] <= 0.1
    assert rep.ci_hi[-1] < 0.5
    assert rep.params["lags"] == [1]


def test_estimate_c3_zero_joint_inconclusive():
    proc = make_iid(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5))
    rep = estimate_C3(proc, IDENTITY, 1.0, np.geomspace(50.0, 100.0, 8), 10 ** 4,
                      rng_seed=SEED)
    assert rep.verdict == INCONCLUSIVE
    assert "no joint exceedances" in rep.details


def test_estimate_c3_comonotone_fails():
    proc = make_comonotone(Pareto(3.0, 1.0), m=1)
    xs = np.geomspace(3.0, 15.0, 9)
    rep = estimate_C3(proc, IDENTITY, 1.0, xs, 10 ** 5, rng_seed=SEED)
    assert rep.verdict == FAIL
    # every coordinate of a path is the same draw: the ratio sits at one
    assert np.all(rep.statistic > 0.9)


def test_estimate_c3_errors():
    proc = make_iid(LogWeibull(2.0))
    with pytest.raises(ParameterError):
        estimate_C3(proc, IDENTITY, 1.0,
                    np.array([math.exp(20.0), math.exp(30.0)]), 10 ** 3,
                    rng_seed=SEED)  # tail underflows to zero on the grid
    with pytest.raises(ParameterError):
        estimate_C3(proc, IDENTITY, 0.0, np.array([2.0, 3.0]), 10 ** 3)
    clipped = make_clipped_iid(TwoSided(Pareto(4.5, 1.0), 0.5, 0.5), 4.0)
    with pytest.raises(UnsupportedCaseError):
        estimate_C3(clipped, IDENTITY, 1.0, np.array([2.0, 3.0]), 10 ** 3)


def test_tail_dependence_lag_verdicts():
    iid = make_iid(TwoSided(Pareto(3.0, 1.0), 0.5, 0.5))
    rep = tail_dependence_lag(iid, np.geomspace(3.0, 10.0, 8), 2 * 10 ** 5,
                              rng_seed=SEED)
    assert rep.verdict == PASS
    assert rep.condition_id == "RV3"
    como = make_comonotone(Pareto(3.0, 1.0), m=1)
    rep = tail_dependence_lag(como, np.geomspace(3.0, 15.0, 9), 10 ** 5,
                              rng_seed=SEED)
    assert rep.verdict == FAIL
    assert np.all(rep.statistic == 1.0)
    rep = tail_dependence_lag(iid, np.geomspace(50.0, 200.0, 8), 2 * 10 ** 5,
                              rng_seed=SEED)
    assert rep.verdict == INCONCLUSIVE
    assert "no marginal exceedances" in rep.details


def test_condition_report_as_dict():
    m = Pareto(3.0, 1.0)
    rep = check_C1(default_g(m), m, np.geomspace(2.0, 100.0, 12), 1.0)
    d = rep.as_dict()
    assert set(d) == {"condition_id", "grid", "statistic", "ci_lo", "ci_hi",
                      "verdict", "params", "seed", "details"}
    assert d["ci_lo"] == []
    assert len(d["statistic"]) == 12
