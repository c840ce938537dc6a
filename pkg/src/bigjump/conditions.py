"""Finite-sample checkers for the tail-shape and dependence conditions.

Every checker turns an asymptotic statement into a trend verdict on a
finite grid: PassTrend / FailTrend / Inconclusive, with the decision rule
declared up front (shared Spearman trend rule from _stats). Monte Carlo
checkers carry CIs and refuse to pass when the decisive CI is too wide.
Closed-form checkers work in hazard space, S(x) = -log F_bar(x), so they
stay exact far beyond floating-point tail underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ldmc, procsim, _parallel
from ._stats import trend_verdict, increasing_verdict, wilson_interval
from .dist import TailModel
from .errors import NumericFailureError, ParameterError, UnsupportedCaseError

__all__ = [
    "GFunction", "SeparatingBoundary", "ConditionReport",
    "default_g", "boundary_catalogue",
    "check_C1", "check_C2_ratio", "check_iid_LD", "estimate_C3",
    "bojanic_seneta", "lemma21_check", "tail_dependence_lag",
    "check_RV1", "check_RV2",
]

PASS = "PassTrend"
FAIL = "FailTrend"
INCONCLUSIVE = "Inconclusive"

_VERDICT = {"pass": PASS, "fail": FAIL, "inconclusive": INCONCLUSIVE}

# margins, stated once
C2_MARGIN = 0.2
C3_MARGIN = 0.1
C3_EXCLUDE = 0.5
BOJANIC_MARGIN = 0.05
LEMMA21_MARGIN = 1e-2
RV_MARGIN = 1e-2
IID_LD_TOL = 0.25
MIN_ESS = 50
X_POINTS = 64           # geometric x-points per n in the sup checkers
CAP_TAIL = 1e-12        # sup grids stop at quantile(1 - CAP_TAIL)


@dataclass
class GFunction:
    """A scale function x -> g(x), positive and nondecreasing where queried."""

    g: Callable
    label: str = ""

    def __call__(self, x):
        return self.g(x)


@dataclass
class SeparatingBoundary:
    """n -> t_n, the level above which the single-jump regime is probed."""

    t: Callable
    regime: str
    params: dict = field(default_factory=dict)

    def __call__(self, n):
        return self.t(n)


@dataclass
class ConditionReport:
    condition_id: str
    grid: np.ndarray
    statistic: np.ndarray
    verdict: str
    details: str = ""
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    seed: int | None = None
    extra: dict = field(default_factory=dict, repr=False)
    companion: "ConditionReport | None" = None

    def as_dict(self):
        def lst(a):
            return [] if a is None else [float(v) for v in np.asarray(a).ravel()]
        return {
            "condition_id": self.condition_id,
            "grid": lst(self.grid),
            "statistic": lst(self.statistic),
            "ci_lo": lst(self.ci_lo),
            "ci_hi": lst(self.ci_hi),
            "verdict": self.verdict,
            "params": self.params,
            "seed": self.seed,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# scale functions and boundaries


class _HazardRatioG:
    """g(x) = x / S(x); module-level class so it survives pickling."""

    def __init__(self, model: TailModel):
        self.model = model

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = np.asarray(self.model.hazard_integral(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = x / s
        return out if out.ndim else float(out)


def default_g(model: TailModel) -> GFunction:
    return GFunction(g=_HazardRatioG(model), label="x/S(x)")


def _eval_g(g, xs):
    fn = g.g if isinstance(g, GFunction) else g
    xs = np.asarray(xs, dtype=float)
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(x))) for x in xs])


class _NagaevBoundary:
    def __init__(self, alpha):
        self.alpha = alpha

    def __call__(self, n):
        return math.sqrt((self.alpha - 2.0) * n * math.log(n))


class _LognormalBoundary:
    def __call__(self, n):
        return math.sqrt(n) * math.log(n)


class _RozovskiBoundary:
    def __init__(self, alpha):
        self.alpha = alpha

    def __call__(self, n):
        a = self.alpha
        if a <= 1.0:
            return math.sqrt(n) * math.log(n) ** (2.0 / a - 1.0)
        return math.sqrt(n) * math.log(n) ** (1.0 / a)


def boundary_catalogue(regime: str, params: dict | None = None) -> SeparatingBoundary:
    """Named separating boundaries.

    nagaev_rv(alpha>2): sqrt((alpha-2) n log n), for unit-variance summands.
    lognormal_ln: sqrt(n) log n.
    rozovski(alpha in (0,2)): sqrt(n)(log n)^{2/alpha-1} on (0,1],
                              sqrt(n)(log n)^{1/alpha} on (1,2);
        alpha here is the log-power exponent of the transformed-Gaussian family.
    custom: params["t"] supplies the callable.
    """
    params = dict(params or {})
    key = regime.strip().lower().replace("-", "_")
    if key in ("nagaev_rv", "nagaevrv"):
        alpha = float(params.get("alpha", 0.0))
        if alpha <= 2.0:
            raise ParameterError("nagaev_rv boundary needs alpha > 2")
        return SeparatingBoundary(t=_NagaevBoundary(alpha), regime="nagaev_rv",
                                  params={"alpha": alpha})
    if key in ("lognormal_ln", "lognormalln"):
        return SeparatingBoundary(t=_LognormalBoundary(), regime="lognormal_ln")
    if key == "rozovski":
        alpha = float(params.get("alpha", 0.0))
        if not 0.0 < alpha < 2.0:
            raise ParameterError("rozovski boundary needs alpha in (0, 2)")
        return SeparatingBoundary(t=_RozovskiBoundary(alpha), regime="rozovski",
                                  params={"alpha": alpha})
    if key == "custom":
        t = params.get("t")
        if not callable(t):
            raise ParameterError("custom boundary needs a callable params['t']")
        return SeparatingBoundary(t=t, regime="custom")
    raise ParameterError(f"unknown boundary regime {regime!r}")


# ---------------------------------------------------------------------------
# deterministic checkers


def _check_grid(xs, name="x_grid"):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
        raise ParameterError(f"{name} must be strictly increasing")
    return xs


def check_C1(g, model: TailModel, x_grid, C: float) -> ConditionReport:
    """Upper scale bound: g(x) S(x) / x must stay below C, with g nondecreasing."""
    xs = _check_grid(x_grid)
    gx = _eval_g(g, xs)
    s = np.asarray(model.hazard_integral(xs), dtype=float)
    with np.errstate(invalid="ignore"):
        stat = gx * s / xs
    nondec = bool(np.all(np.diff(gx) >= -1e-12 * np.abs(gx[:-1])))
    sup = float(np.nanmax(stat))
    ok = sup <= C * (1.0 + 1e-9) and nondec
    notes = [f"sup={sup:.6g}", f"C={C:.6g}", f"g nondecreasing: {nondec}"]
    if np.any(gx >= xs):
        notes.append("warning: g(x) >= x at some grid points")
    return ConditionReport(
        condition_id="C1", grid=xs, statistic=stat,
        verdict=PASS if ok else FAIL, details="; ".join(notes),
        params={"C": float(C), "label": getattr(g, "label", "")})


def _sup_hazard_ratio(g, model, lo, hi, points):
    """sup over a geometric grid of |S(x)/S(g(x)) - 1|, masking points where
    S is not yet positive. Returns (sup, valid_points)."""
    xs = np.geomspace(lo, hi, points)
    sx = np.asarray(model.hazard_integral(xs), dtype=float)
    gx = _eval_g(g, xs)
    sg = np.asarray(model.hazard_integral(np.maximum(gx, 0.0)), dtype=float)
    valid = np.isfinite(sx) & np.isfinite(sg) & (sx > 0) & (sg > 0)
    if valid.sum() < 2:
        return math.nan, int(valid.sum())
    ratio = np.abs(sx[valid] / sg[valid] - 1.0)
    return float(ratio.max()), int(valid.sum())


def check_C2_ratio(g, model: TailModel, boundary: SeparatingBoundary, n_grid,
                   delta: float = 1.0, x_points: int = X_POINTS) -> ConditionReport:
    """Hazard insensitivity above the boundary.

    For each n, statistic = sup over x in (delta t_n, quantile(1-1e-12)] of
    |S(x)/S(g(x)) - 1| on a geometric x-grid. Pass needs the per-n sups
    decreasing with the last below 0.2. A companion report tracks the
    required divergence of g(t_n)/sqrt(n).
    """
    if delta <= 0:
        raise ParameterError("delta must be positive")
    ns = _check_grid(n_grid, "n_grid")
    x_cap = float(model.quantile(1.0 - CAP_TAIL))
    stats, kept, dropped = [], [], []
    for n in ns:
        lo = delta * float(boundary.t(n))
        if not (0 < lo < x_cap):
            dropped.append(float(n))
            continue
        sup, nvalid = _sup_hazard_ratio(g, model, lo * (1 + 1e-9), x_cap, x_points)
        if not math.isfinite(sup):
            dropped.append(float(n))
            continue
        stats.append(sup)
        kept.append(float(n))
    params = {"delta": float(delta), "threshold": C2_MARGIN,
              "x_points": x_points, "x_cap": x_cap,
              "label": getattr(g, "label", "")}
    if not kept:
        return ConditionReport(
            condition_id="C2a", grid=np.asarray(dropped), statistic=np.array([]),
            verdict=INCONCLUSIVE, params=params,
            details="empty x-grid at every n: delta*t_n beyond the quantile cap")
    kept_a = np.asarray(kept)
    stats_a = np.asarray(stats)
    verdict, note = trend_verdict(stats_a, C2_MARGIN)
    if dropped:
        verdict, note = "inconclusive", (
            note + f"; empty x-grid at n in {dropped} (boundary beyond the cap)")
    # companion: g(t_n)/sqrt(n) must diverge
    tns = np.array([float(boundary.t(n)) for n in kept_a])
    growth = _eval_g(g, tns) / np.sqrt(kept_a)
    v2, note2 = increasing_verdict(growth)
    comp = ConditionReport(condition_id="C2b", grid=kept_a, statistic=growth,
                           verdict=_VERDICT[v2], details=note2, params=params)
    return ConditionReport(condition_id="C2a", grid=kept_a, statistic=stats_a,
                           verdict=_VERDICT[verdict], details=note,
                           params=params, companion=comp)


def bojanic_seneta(S, x_grid) -> ConditionReport:
    """Slow-variation criterion for log-tail functions.

    statistic = x S'(x) log S(x) / S(x), the derivative taken centrally in
    log-space with relative step 1e-5. Pass iff |statistic| decreasing with
    final value <= 0.05.
    """
    xs = _check_grid(x_grid)
    if xs[0] <= 0:
        raise ParameterError("grid must be positive")
    u = np.log(xs)
    h = 1e-5 * np.maximum(np.abs(u), 1.0)
    sx = _eval_fn(S, xs)
    sp = _eval_fn(S, np.exp(u + h))
    sm = _eval_fn(S, np.exp(u - h))
    if np.any(sx <= 0):
        raise ParameterError("S must be positive on the grid")
    ds_du = (sp - sm) / (2.0 * h)      # equals x * S'(x)
    stat = ds_du * np.log(sx) / sx
    if not np.all(np.isfinite(stat)):
        raise NumericFailureError("non-finite difference quotient in the criterion")
    verdict, note = trend_verdict(np.abs(stat), BOJANIC_MARGIN)
    return ConditionReport(condition_id="BojanicSeneta", grid=xs, statistic=stat,
                           verdict=_VERDICT[verdict], details=note,
                           params={"threshold": BOJANIC_MARGIN, "rel_step": 1e-5})


def _eval_fn(fn, xs):
    xs = np.asarray(xs, dtype=float)
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(x))) for x in xs])


def lemma21_check(model: TailModel, g, boundary: SeparatingBoundary, n_grid,
                  eps: float = 1.0, x_points: int = X_POINTS,
                  x_span: float = 1e6) -> ConditionReport:
    """Joint-exceedance domination: sup_{x > t_n} n F(eps x) F(eps g(x)) / F(x)
    must vanish along the n-grid (F denotes the upper tail).

    Evaluated in hazard space, exp(log n - S(eps x) - S(eps g(x)) + S(x)), so
    the sup survives far past tail underflow. The unbounded sup is scanned on
    a geometric grid spanning [t_n, t_n * x_span]; the cap is reported.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    ns = _check_grid(n_grid, "n_grid")
    stats = []
    for n in ns:
        t = float(boundary.t(n))
        if t <= 0:
            raise ParameterError("boundary must be positive on the n-grid")
        xs = np.geomspace(t, t * x_span, x_points)
        gx = np.maximum(_eval_g(g, xs), 0.0)
        log_stat = (math.log(n)
                    - np.asarray(model.hazard_integral(eps * xs), dtype=float)
                    - np.asarray(model.hazard_integral(eps * gx), dtype=float)
                    + np.asarray(model.hazard_integral(xs), dtype=float))
        stats.append(math.exp(float(np.max(log_stat))))
    stats_a = np.asarray(stats)
    verdict, note = trend_verdict(stats_a, LEMMA21_MARGIN)
    return ConditionReport(condition_id="Lemma21", grid=ns, statistic=stats_a,
                           verdict=_VERDICT[verdict],
                           details=note + f"; x scanned to t_n*{x_span:g}",
                           params={"eps": float(eps), "threshold": LEMMA21_MARGIN,
                                   "x_points": x_points, "x_span": float(x_span)})


def check_RV1(model: TailModel, x_grid) -> ConditionReport:
    """Tail regular variation: F(2x)/F(x) * 2^alpha -> 1."""
    xs = _check_grid(x_grid)
    alpha = model.tail_index
    if alpha is None:
        return ConditionReport(condition_id="RV1", grid=xs,
                               statistic=np.full(xs.size, np.nan),
                               verdict=INCONCLUSIVE,
                               details="model declares no tail index")
    s1 = np.asarray(model.hazard_integral(xs), dtype=float)
    s2 = np.asarray(model.hazard_integral(2.0 * xs), dtype=float)
    stat = np.abs(np.exp(s1 - s2 + alpha * math.log(2.0)) - 1.0)
    verdict, note = trend_verdict(stat, RV_MARGIN)
    return ConditionReport(condition_id="RV1", grid=xs, statistic=stat,
                           verdict=_VERDICT[verdict], details=note,
                           params={"alpha": float(alpha), "threshold": RV_MARGIN})


def check_RV2(model: TailModel, x_grid) -> ConditionReport:
    """Tail balance: P(X>x)/P(|X|>x) -> p_plus."""
    xs = _check_grid(x_grid)
    p = float(model.p_plus)
    ratio = np.asarray(model.tail(xs), dtype=float) / np.asarray(
        model.abs_tail(xs), dtype=float)
    stat = np.abs(ratio - p)
    verdict, note = trend_verdict(stat, RV_MARGIN)
    return ConditionReport(condition_id="RV2", grid=xs, statistic=stat,
                           verdict=_VERDICT[verdict], details=note,
                           params={"p_plus": p, "threshold": RV_MARGIN})


# ---------------------------------------------------------------------------
# Monte Carlo checkers


def check_iid_LD(model: TailModel, n: int, boundary: SeparatingBoundary,
                 delta: float = 1.0, reps: int = 10 ** 5, rng_seed: int = 0,
                 workers: int = 1, points: int = ldmc.GRID_POINTS) -> ConditionReport:
    """Single-jump ratio for the centered iid sum above the boundary.

    Uses the variance-reduced estimator from ldmc on its default grid.
    Pass iff every grid CI intersects [0.75, 1.25]; any grid point whose
    effective sample size falls below 50 makes the report Inconclusive.
    """
    if reps < 10 ** 4:
        raise ParameterError("reps must be at least 1e4")
    grid = ldmc.default_grid(model, n, boundary, delta, reps, points)
    curve = ldmc.estimate_reduced_iid(model, n, grid, reps, rng_seed, workers)
    ess = np.asarray(curve.extra["ess"], dtype=float)
    weak = ess < MIN_ESS
    covered = (curve.ci_lo <= 1.0 + IID_LD_TOL) & (curve.ci_hi >= 1.0 - IID_LD_TOL)
    if weak.any():
        verdict = INCONCLUSIVE
        details = (f"effective sample size < {MIN_ESS} at grid indices "
                   f"{np.flatnonzero(weak).tolist()}")
    elif covered.all():
        verdict = PASS
        details = f"all CIs intersect [{1 - IID_LD_TOL}, {1 + IID_LD_TOL}]"
    else:
        verdict = FAIL
        details = (f"CI misses the band at grid indices "
                   f"{np.flatnonzero(~covered).tolist()}")
    return ConditionReport(
        condition_id="C2-iidLD", grid=grid.xs, statistic=curve.ratio,
        verdict=verdict, details=details, ci_lo=curve.ci_lo, ci_hi=curve.ci_hi,
        params={"n": int(n), "delta": float(delta), "reps": int(reps),
                "tol": IID_LD_TOL, "min_ess": MIN_ESS},
        seed=rng_seed, extra={"ess": ess, "curve": curve})


def _lag_seed(seed: int, h: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(h,))
    return int(ss.generate_state(1, np.uint64)[0])


def _c3_block(index, block_reps, seed, process, h, thr0, thr1):
    rng = _parallel.block_rng(seed, index)
    pairs = procsim.sample_pairs(process, h, block_reps, rng)
    a = np.abs(pairs[:, 0])
    b = np.abs(pairs[:, 1])
    return ((a[:, None] > thr0[None, :]) & (b[:, None] > thr1[None, :])).sum(
        axis=0).astype(np.int64)


def _lag_block(index, block_reps, seed, process, h, xs):
    rng = _parallel.block_rng(seed, index)
    pairs = procsim.sample_pairs(process, h, block_reps, rng)
    a = np.abs(pairs[:, 0])
    b = np.abs(pairs[:, 1])
    marg = (a[:, None] > xs[None, :])
    joint = marg & (b[:, None] > xs[None, :])
    return (joint.sum(axis=0).astype(np.int64), marg.sum(axis=0).astype(np.int64))


def _lag_counts(fn, process, h, reps, seed, workers, extra):
    parts = _parallel.map_blocks(fn, reps, _lag_seed(seed, h), workers=workers,
                                 extra=(process, h) + extra)
    if isinstance(parts[0], tuple):
        joint = np.zeros_like(parts[0][0])
        marg = np.zeros_like(parts[0][1])
        for a, b in parts:
            joint += a
            marg += b
        return joint, marg
    total = np.zeros_like(parts[0])
    for a in parts:
        total += a
    return total


def estimate_C3(process, g, eps: float, x_grid, reps: int, rng_seed: int = 0,
                workers: int = 1) -> ConditionReport:
    """Anti-clustering at the jump scale.

    For each lag h up to the dependence range, Monte Carlo estimate of
    P(|X_0| > eps g(x), |X_h| > eps x) / F(x), with the denominator from the
    exact marginal tail. The reported statistic is the worst lag per grid
    point. Pass needs a decreasing statistic whose final point is <= 0.1
    with a CI excluding 0.5.
    """
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if reps < 1:
        raise ParameterError("reps must be positive")
    xs = _check_grid(x_grid)
    marginal = process.marginal
    if marginal is None:
        raise UnsupportedCaseError("process exposes no marginal tail")
    denom = np.asarray(marginal.abs_tail(xs), dtype=float)
    if np.any(denom <= 0):
        raise ParameterError("grid runs beyond the marginal support")
    thr0 = eps * np.maximum(_eval_g(g, xs), 0.0)
    thr1 = eps * xs
    lags = list(range(1, max(int(process.m), 1) + 1))
    per_lag = {}
    for h in lags:
        per_lag[h] = _lag_counts(_c3_block, process, h, reps, rng_seed, workers,
                                 extra=(thr0, thr1))
    counts = np.stack([per_lag[h] for h in lags])        # (lags, xs)
    ratios = counts / reps / denom[None, :]
    worst_lag = np.argmax(ratios, axis=0)
    stat = ratios[worst_lag, np.arange(xs.size)]
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for j in range(xs.size):
        a, b = wilson_interval(int(counts[worst_lag[j], j]), reps)
        lo[j], hi[j] = a / denom[j], b / denom[j]
    params = {"eps": float(eps), "reps": int(reps), "threshold": C3_MARGIN,
              "exclude": C3_EXCLUDE, "lags": lags}
    if int(counts[:, -1].sum()) == 0 and reps < 10 ** 6:
        return ConditionReport(
            condition_id="C3", grid=xs, statistic=stat, verdict=INCONCLUSIVE,
            details="no joint exceedances at the top threshold; re-grid or add reps",
            ci_lo=lo, ci_hi=hi, params=params, seed=rng_seed,
            extra={"per_lag": ratios})
    verdict, note = trend_verdict(stat, C3_MARGIN,
                                  ci_width_final=float(hi[-1] - lo[-1]))
    if verdict == "pass" and hi[-1] >= C3_EXCLUDE:
        verdict, note = "inconclusive", note + "; final CI does not exclude 0.5"
    return ConditionReport(condition_id="C3", grid=xs, statistic=stat,
                           verdict=_VERDICT[verdict], details=note,
                           ci_lo=lo, ci_hi=hi, params=params, seed=rng_seed,
                           extra={"per_lag": ratios})


def tail_dependence_lag(process, x_grid, reps: int, rng_seed: int = 0,
                        workers: int = 1) -> ConditionReport:
    """Lag-h upper tail dependence P(|X_h| > x | |X_0| > x) per lag.

    Verdict follows the same trend rule as estimate_C3: the worst-lag curve
    must decrease to <= 0.1 with a final CI excluding 0.5.
    """
    if reps < 1:
        raise ParameterError("reps must be positive")
    xs = _check_grid(x_grid)
    lags = list(range(1, max(int(process.m), 1) + 1))
    joint = {}
    marg = {}
    for h in lags:
        joint[h], marg[h] = _lag_counts(_lag_block, process, h, reps, rng_seed,
                                        workers, extra=(xs,))
    js = np.stack([joint[h] for h in lags]).astype(float)
    ms = np.stack([marg[h] for h in lags]).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(ms > 0, js / ms, np.nan)
    worst = np.nanargmax(np.where(np.isnan(ratios), -1.0, ratios), axis=0)
    stat = ratios[worst, np.arange(xs.size)]
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for j in range(xs.size):
        m_j = int(ms[worst[j], j])
        if m_j == 0:
            lo[j], hi[j] = 0.0, 1.0
        else:
            lo[j], hi[j] = wilson_interval(int(js[worst[j], j]), m_j)
    params = {"reps": int(reps), "threshold": C3_MARGIN,
              "exclude": C3_EXCLUDE, "lags": lags}
    if np.any(ms[:, -1] == 0):
        # 0/0 at the decisive point: no rep budget can rescue this grid
        return ConditionReport(
            condition_id="RV3", grid=xs, statistic=stat, verdict=INCONCLUSIVE,
            details="no marginal exceedances at the top threshold",
            ci_lo=lo, ci_hi=hi, params=params, seed=rng_seed,
            extra={"per_lag": ratios})
    verdict, note = trend_verdict(stat, C3_MARGIN,
                                  ci_width_final=float(hi[-1] - lo[-1]))
    if verdict == "pass" and hi[-1] >= C3_EXCLUDE:
        verdict, note = "inconclusive", note + "; final CI does not exclude 0.5"
    return ConditionReport(condition_id="RV3", grid=xs, statistic=stat,
                           verdict=_VERDICT[verdict], details=note,
                           ci_lo=lo, ci_hi=hi, params=params, seed=rng_seed,
                           extra={"per_lag": ratios})
