"""Monte Carlo engines and closed bounds for sums of heavy-tailed terms.

Everything here works on centered sums: the exceedance event is always
S_n - n*mu > x, and the matching marginal target is the centered tail
F_bar_c(x) = P(X - mu > x). Grids live in centered coordinates too, so the
separating boundaries (which assume centered summands) apply directly.

Replication parallelism follows a fixed block layout: block sizes depend
only on (reps, n), every block owns an rng seeded by (seed, block index),
and partial results are reduced in block order. Results are therefore
byte-identical for any worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special as sc

from . import _parallel
from ._stats import Z99, mean_interval, wilson_interval
from .dist import TailModel
from .errors import InfeasibleError, ParameterError, UnsupportedCaseError
from .procsim import ProcessModel

__all__ = [
    "ThresholdGrid", "RatioCurve", "SupReport", "default_grid",
    "estimate_naive", "estimate_reduced_iid", "normal_regime_ratio",
    "prokhorov_bound", "fuk_nagaev_bound", "uniform_sup_report",
    "FUK_NAGAEV_CP", "FUK_NAGAEV_DP",
]

GRID_POINTS = 16
FEASIBILITY_MIN_HITS = 50       # naive MC: expected exceedances at the top threshold
CEILING_HITS = 10               # grid ceiling: n*F_bar_c(x_top) = CEILING_HITS/reps


@dataclass(frozen=True)
class ThresholdGrid:
    """Increasing thresholds for the centered sum, anchored at delta * t_n."""

    xs: np.ndarray
    boundary: object            # SeparatingBoundary (duck-typed: .t(n))
    n: int
    delta: float

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        object.__setattr__(self, "xs", xs)
        if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
            raise ParameterError("thresholds must be strictly increasing")
        if self.boundary is not None:
            anchor = self.delta * float(self.boundary.t(self.n))
            if xs[0] < anchor * (1.0 - 1e-12):
                raise ParameterError(
                    f"grid starts at {xs[0]:.6g}, below delta*t_n = {anchor:.6g}")


@dataclass
class RatioCurve:
    grid: ThresholdGrid
    p_hat: np.ndarray
    target: np.ndarray
    ratio: np.ndarray
    ci_lo: np.ndarray           # ratio scale
    ci_hi: np.ndarray
    reps: int
    estimator: str              # "naive" | "reduced_iid"
    target_kind: str            # "subexp_n_tail" | "normal" | "linear_pm"
    rel_se: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def csv_rows(self):
        header = ["x", "p_hat", "target", "ratio", "ci_lo", "ci_hi", "reps", "estimator"]
        rows = [header]
        for i, x in enumerate(self.grid.xs):
            rows.append([repr(float(x)), repr(float(self.p_hat[i])),
                         repr(float(self.target[i])), repr(float(self.ratio[i])),
                         repr(float(self.ci_lo[i])), repr(float(self.ci_hi[i])),
                         str(self.reps), self.estimator])
        return rows

    def as_dict(self):
        return {
            "xs": [float(v) for v in self.grid.xs],
            "p_hat": [float(v) for v in self.p_hat],
            "target": [float(v) for v in self.target],
            "ratio": [float(v) for v in self.ratio],
            "ci_lo": [float(v) for v in self.ci_lo],
            "ci_hi": [float(v) for v in self.ci_hi],
            "reps": self.reps,
            "estimator": self.estimator,
            "target_kind": self.target_kind,
            "n": self.grid.n,
            "delta": self.grid.delta,
            "extra": self.extra,
        }


@dataclass(frozen=True)
class SupReport:
    sup: float
    index: int
    x: float
    ci_halfwidth: float


def centered_tail(model: TailModel, x):
    """P(X - E[X] > x) from the model's total tail."""
    return model.tail(np.asarray(x, dtype=float) + model.mean)


def default_grid(model: TailModel, n: int, boundary, delta: float, reps: int,
                 points: int = GRID_POINTS) -> ThresholdGrid:
    """Geometric thresholds from delta*t_n up to the feasibility ceiling
    where n * F_bar_c(x) = CEILING_HITS / reps."""
    if n < 1 or reps < 1:
        raise ParameterError("n and reps must be positive")
    lo = delta * float(boundary.t(n))
    if lo <= 0:
        raise ParameterError("boundary anchor must be positive")
    u_top = CEILING_HITS / (n * reps)
    if not (0 < u_top < 1):
        raise ParameterError("reps too small for any feasible threshold")
    hi = float(model.quantile(1.0 - u_top)) - model.mean
    if hi <= lo:
        p_lo = float(centered_tail(model, lo))
        needed = math.ceil(CEILING_HITS / (n * p_lo)) if p_lo > 0 else None
        raise InfeasibleError(
            f"feasibility ceiling {hi:.6g} sits below the boundary anchor {lo:.6g}",
            required_reps=needed)
    xs = np.geomspace(lo, hi, points)
    return ThresholdGrid(xs=xs, boundary=boundary, n=n, delta=delta)


# ---------------------------------------------------------------------------
# block workers (module-level for pickling)


def _block_size_for(n: int) -> int:
    # keep a block's path matrix around 16 MB
    return max(256, min(_parallel.DEFAULT_BLOCK, (1 << 21) // max(n, 1)))


def _naive_block(index, block_reps, seed, process, n, xs):
    rng = _parallel.block_rng(seed, index)
    paths = process.sample_paths(n, block_reps, rng)
    sums = paths.sum(axis=1) - n * process.mean
    return (sums[:, None] > xs[None, :]).sum(axis=0)


def _reduced_block(index, block_reps, seed, model, n, xs, mu):
    rng = _parallel.block_rng(seed, index)
    if n > 1:
        y = model.sample(rng, (block_reps, n - 1)) - mu
        s = y.sum(axis=1)
        m = y.max(axis=1)
    else:
        s = np.zeros(block_reps)
        m = np.full(block_reps, -np.inf)
    s1 = np.empty(xs.size)
    s2 = np.empty(xs.size)
    for j, x in enumerate(xs):
        v = n * np.asarray(model.tail(np.maximum(m, x - s) + mu))
        s1[j] = v.sum()
        s2[j] = (v * v).sum()
    return s1, s2


def _sum_exceed_counts(process, n, xs, reps, seed, workers):
    parts = _parallel.map_blocks(_naive_block, reps, seed, workers=workers,
                                 block=_block_size_for(n),
                                 extra=(process, n, xs))
    counts = np.zeros(xs.size, dtype=np.int64)
    for part in parts:
        counts += part
    return counts


# ---------------------------------------------------------------------------
# estimators


def estimate_naive(process: ProcessModel, n: int, grid: ThresholdGrid, reps: int,
                   rng_seed: int, workers: int = 1) -> RatioCurve:
    """Shared-path exceedance counting for the centered sum, all thresholds in
    one pass, with Wilson 99% intervals and the n*F_bar_c target."""
    if process.marginal is None:
        raise UnsupportedCaseError("process exposes no marginal tail for the target")
    xs = grid.xs
    marginal = process.marginal
    target = n * np.asarray(centered_tail(marginal, xs))
    p_heur = float(target[-1])
    if reps * p_heur < FEASIBILITY_MIN_HITS:
        raise InfeasibleError(
            f"expected exceedances at the top threshold: {reps * p_heur:.2f} < "
            f"{FEASIBILITY_MIN_HITS}",
            required_reps=math.ceil(FEASIBILITY_MIN_HITS / p_heur) if p_heur > 0 else None)
    counts = _sum_exceed_counts(process, n, xs, reps, rng_seed, workers)
    p_hat = counts / reps
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for i, k in enumerate(counts):
        lo[i], hi[i] = wilson_interval(int(k), reps)
    return RatioCurve(grid=grid, p_hat=p_hat, target=target,
                      ratio=p_hat / target, ci_lo=lo / target, ci_hi=hi / target,
                      reps=reps, estimator="naive", target_kind="subexp_n_tail",
                      extra={"seed": rng_seed})


def estimate_reduced_iid(model: TailModel, n: int, grid: ThresholdGrid, reps: int,
                         rng_seed: int, workers: int = 1) -> RatioCurve:
    """Order-statistic conditioning estimator for iid sums.

    Per replication draw X_1..X_{n-1} (centered), then average
    n * F_bar_c(max(M_{n-1}, x - S_{n-1})): unbiased for P(S_n - n mu > x)
    with far smaller variance than naive counting at rare levels.
    """
    xs = grid.xs
    mu = model.mean
    parts = _parallel.map_blocks(_reduced_block, reps, rng_seed, workers=workers,
                                 block=_block_size_for(max(n - 1, 1)),
                                 extra=(model, n, xs, mu))
    s1 = np.zeros(xs.size)
    s2 = np.zeros(xs.size)
    for a, b in parts:
        s1 += a
        s2 += b
    target = n * np.asarray(centered_tail(model, xs))
    p_hat, lo, hi, se = mean_interval(s1, s2, reps)
    rel = np.divide(se, p_hat, out=np.full_like(se, np.inf), where=p_hat > 0)
    # effective sample size of the nonnegative weights, (sum w)^2 / sum w^2
    ess = np.divide(s1 * s1, s2, out=np.zeros_like(s1), where=s2 > 0)
    return RatioCurve(grid=grid, p_hat=p_hat, target=target,
                      ratio=p_hat / target, ci_lo=lo / target, ci_hi=hi / target,
                      reps=reps, estimator="reduced_iid",
                      target_kind="subexp_n_tail", rel_se=rel,
                      extra={"seed": rng_seed, "ess": ess})


def normal_regime_ratio(process: ProcessModel, n: int, xs: Sequence[float],
                        reps: int, rng_seed: int, workers: int = 1) -> RatioCurve:
    """Exceedance ratio against the Gaussian tail Phi_bar(x / sigma_n) with
    sigma_n^2 = n (gamma(0) + 2 sum_h gamma(h)). Thresholds below the boundary."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
        raise ParameterError("thresholds must be strictly increasing")
    var_n = process.sum_variance(n)
    if not math.isfinite(var_n) or var_n <= 0:
        raise UnsupportedCaseError("sum variance unavailable or infinite")
    sigma_n = math.sqrt(var_n)
    target = sc.ndtr(-xs / sigma_n)
    counts = _sum_exceed_counts(process, n, xs, reps, rng_seed, workers)
    p_hat = counts / reps
    lo = np.empty(xs.size)
    hi = np.empty(xs.size)
    for i, k in enumerate(counts):
        lo[i], hi[i] = wilson_interval(int(k), reps)
    grid = ThresholdGrid(xs=xs, boundary=None, n=n, delta=0.0)
    return RatioCurve(grid=grid, p_hat=p_hat, target=target,
                      ratio=p_hat / target, ci_lo=lo / target, ci_hi=hi / target,
                      reps=reps, estimator="naive", target_kind="normal",
                      extra={"sigma_n": sigma_n, "seed": rng_seed})


# ---------------------------------------------------------------------------
# closed bounds


def prokhorov_bound(x: float, c: float, sigma2_n: float) -> float:
    """exp(-(x/(2c)) * arsinh(c x / (2 sigma_n^2))) for sums of mean-zero
    terms bounded by c in absolute value."""
    if x <= 0 or c <= 0 or sigma2_n <= 0:
        raise ParameterError("prokhorov_bound needs positive x, c, sigma2_n")
    return math.exp(-(x / (2.0 * c)) * math.asinh(c * x / (2.0 * sigma2_n)))


FUK_NAGAEV_CP = lambda p: (1.0 + 2.0 / p) ** p
FUK_NAGAEV_DP = lambda p: 2.0 * math.exp(-p) / (p + 2.0) ** 2


def fuk_nagaev_bound(x: float, p: float, m_pn: float, sigma_n: float,
                     c_p: float | None = None, d_p: float | None = None) -> float:
    """c_p m_pn x^{-p} + exp(-d_p (x/sigma_n)^2).

    The admissible constant pair is caller-configurable; the defaults
    c_p=(1+2/p)^p, d_p=2 e^{-p} (p+2)^{-2} are a standard valid choice.
    """
    if x <= 0:
        raise ParameterError("x must be positive")
    if p < 2:
        raise ParameterError("fuk_nagaev_bound needs p >= 2")
    if c_p is None:
        c_p = FUK_NAGAEV_CP(p)
    if d_p is None:
        d_p = FUK_NAGAEV_DP(p)
    return c_p * m_pn * x ** (-p) + math.exp(-d_p * (x / sigma_n) ** 2)


def uniform_sup_report(curve: RatioCurve) -> SupReport:
    """sup_i |ratio_i - 1| with the attaining index and its CI half-width."""
    dev = np.abs(curve.ratio - 1.0)
    i = int(np.argmax(dev))
    half = float((curve.ci_hi[i] - curve.ci_lo[i]) / 2.0)
    return SupReport(sup=float(dev[i]), index=i, x=float(curve.grid.xs[i]),
                     ci_halfwidth=half)
