"""Heavy-tailed marginal models.

Every model exposes the same surface: a total tail function P(X > x) defined
for all real x, the integrated hazard S(x) = -log P(X > x), a quantile, exact
moments where they exist, a vectorised sampler, and the tail-balance weights
(p_plus, p_minus) describing how mass splits between the two tails.

Families:
    Pareto          P(X > x) = (x / x_m)^-alpha, x >= x_m        (reg_varying)
    Lognormal       log X ~ N(mu, sigma^2)                       (lognormal_type)
    LogWeibull      P(X > x) = exp(-scale * (log x)^alpha), a>1  (lognormal_type)
    WeibullType     P(X > x) = exp(-x^alpha), 0 < alpha < 1      (weibull_type)
    TwoSided        sign-mixture of a nonnegative base model
    ScaleMixture    finite positive mixture sum w_i * F_bar(x / s_i)
    LognormalScaleMixture   X = sigma * Z with lognormal sigma (Breiman regime)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy import special as sc

from .errors import NumericFailureError, ParameterError, UnsupportedCaseError

__all__ = [
    "TailModel", "Pareto", "Lognormal", "LogWeibull", "WeibullType",
    "TwoSided", "ScaleMixture", "LognormalScaleMixture",
    "make_pareto", "make_lognormal", "make_logweibull", "make_weibull_type",
    "make_two_sided", "squared_model",
    "AuxiliaryFunction", "mean_excess", "mean_excess_function",
    "insensitivity_ratio", "von_mises_reconstruct",
]

# Numeric contracts shared across the module.
QUANTILE_RTOL = 1e-12
TAIL_TRUNCATION = 1e-14     # mean-excess integrals stop at quantile(1 - this)


def _maybe_scalar(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


class TailModel:
    """Base class; subclasses fill in the family specifics."""

    class_tag: str = ""
    support_left: float = 0.0
    p_plus: float = 1.0
    p_minus: float = 0.0
    tail_index: float | None = None     # alpha for regularly varying tails

    # -- core surface -------------------------------------------------------

    def tail(self, x):
        raise NotImplementedError

    def hazard_integral(self, x):
        """S(x) = -log P(X > x); overridden with closed forms where they exist."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            s = -np.log(self.tail(x))
        return _maybe_scalar(s, x)

    def quantile(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size):
        raise NotImplementedError

    def moment(self, k: int) -> float:
        """E[X^k]; math.inf when the moment diverges."""
        raise NotImplementedError

    @cached_property
    def mean(self) -> float:
        return self.moment(1)

    @cached_property
    def variance(self) -> float:
        m2 = self.moment(2)
        if not math.isfinite(m2):
            return math.inf
        return m2 - self.mean ** 2

    # -- derived conveniences ------------------------------------------------

    def abs_tail(self, t):
        """P(|X| > t) for t >= 0."""
        return self.tail(t)

    def abs_quantile(self, u):
        """Quantile of |X|."""
        return self.quantile(u)

    def centered_tail(self, y):
        """P(X - E[X] > y)."""
        return self.tail(np.asarray(y, dtype=float) + self.mean)

    def centered_abs_tail(self, y):
        """P(|X - E[X]| > y) for y >= 0, from the total tail function."""
        y = np.asarray(y, dtype=float)
        mu = self.mean
        out = self.tail(mu + y) + (1.0 - self.tail(mu - y))
        return _maybe_scalar(out, y)

    def tail_integral(self, x) -> float:
        """integral_x^inf P(X > t) dt; numeric fallback, closed forms override."""
        return _tail_integral_numeric(self, float(x))

    def __repr__(self):
        pairs = ", ".join(f"{k}={v!r}" for k, v in self._params().items())
        return f"{type(self).__name__}({pairs})"

    def _params(self) -> dict:
        return {}


# ---------------------------------------------------------------------------
# concrete families


class Pareto(TailModel):
    class_tag = "reg_varying"

    def __init__(self, alpha: float, x_m: float = 1.0):
        if not (alpha > 0):
            raise ParameterError(f"pareto index must be positive, got {alpha}")
        if not (x_m > 0):
            raise ParameterError(f"pareto scale must be positive, got {x_m}")
        self.alpha = float(alpha)
        self.x_m = float(x_m)
        self.support_left = self.x_m
        self.tail_index = self.alpha

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        r = np.maximum(x, self.x_m) / self.x_m
        return _maybe_scalar(r ** -self.alpha, x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        r = np.maximum(x, self.x_m) / self.x_m
        return _maybe_scalar(self.alpha * np.log(r), x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        _check_prob_open(u)
        return _maybe_scalar(self.x_m * (1.0 - u) ** (-1.0 / self.alpha), u)

    def sample(self, rng, size):
        return self.x_m * np.exp(rng.standard_exponential(size) / self.alpha)

    def moment(self, k):
        if self.alpha <= k:
            return math.inf
        return self.alpha * self.x_m ** k / (self.alpha - k)

    def tail_integral(self, x):
        if self.alpha <= 1:
            return math.inf
        x = float(x)
        if x <= self.x_m:
            return (self.x_m - x) + self.x_m / (self.alpha - 1.0)
        return x * float(self.tail(x)) / (self.alpha - 1.0)

    def _params(self):
        return {"alpha": self.alpha, "x_m": self.x_m}


class Lognormal(TailModel):
    class_tag = "lognormal_type"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not (sigma > 0):
            raise ParameterError(f"lognormal sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.support_left = 0.0

    def _z(self, x):
        with np.errstate(divide="ignore"):
            return (np.log(x) - self.mu) / self.sigma

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x)
        out = np.ones_like(xv)
        pos = xv > 0
        out[pos] = sc.ndtr(-self._z(xv[pos]))
        return _maybe_scalar(out if x.ndim else out[0], x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x)
        out = np.zeros_like(xv)
        pos = xv > 0
        out[pos] = -sc.log_ndtr(-self._z(xv[pos]))
        return _maybe_scalar(out if x.ndim else out[0], x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        _check_prob_open(u)
        return _maybe_scalar(np.exp(self.mu + self.sigma * sc.ndtri(u)), u)

    def sample(self, rng, size):
        return np.exp(self.mu + self.sigma * rng.standard_normal(size))

    def moment(self, k):
        return math.exp(k * self.mu + 0.5 * (k * self.sigma) ** 2)

    def tail_integral(self, x):
        x = float(x)
        if x <= 0:
            return self.mean - x
        return float(self.tail(x)) * self.mean_excess_exact(x)

    def mean_excess_exact(self, x):
        """a(x) = E[X - x | X > x] without cancellation.

        Writing z = (log x - mu)/sigma, the partial expectation identity gives
        a(x) = x * (erfcx((z - sigma)/sqrt(2)) / erfcx(z/sqrt(2)) - 1), exact
        for every z because erfcx carries the Gaussian factor analytically.
        """
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ParameterError("mean_excess_exact needs x > 0")
        z = self._z(x)
        r = sc.erfcx((z - self.sigma) / math.sqrt(2.0)) / sc.erfcx(z / math.sqrt(2.0))
        return _maybe_scalar(x * (r - 1.0), x)

    def _params(self):
        return {"mu": self.mu, "sigma": self.sigma}


class LogWeibull(TailModel):
    """P(X > x) = exp(-scale * (log x)^alpha) for x > 1, with alpha > 1.

    Slowly-growing hazard, so the tail is heavier than any Weibull yet all
    moments are finite. The `scale` knob also absorbs exact marginals of
    componentwise-minimum constructions (scale = number of factors).
    """

    class_tag = "log_weibull"

    def __init__(self, alpha: float, scale: float = 1.0):
        if not (alpha > 1):
            raise ParameterError(f"log-Weibull exponent must exceed 1, got {alpha}")
        if not (scale > 0):
            raise ParameterError(f"hazard scale must be positive, got {scale}")
        self.alpha = float(alpha)
        self.scale = float(scale)
        self.support_left = 1.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        lx = np.log(np.maximum(x, 1.0))
        return _maybe_scalar(np.exp(-self.scale * lx ** self.alpha), x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        lx = np.log(np.maximum(x, 1.0))
        return _maybe_scalar(self.scale * lx ** self.alpha, x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        _check_prob_open(u)
        return _maybe_scalar(np.exp((-np.log1p(-u) / self.scale) ** (1.0 / self.alpha)), u)

    def sample(self, rng, size):
        e = rng.standard_exponential(size)
        return np.exp((e / self.scale) ** (1.0 / self.alpha))

    def moment(self, k):
        # E[X^k] = 1 + k * int_0^inf exp(k t - scale * t^alpha) dt
        val, err = integrate.quad(
            lambda t: math.exp(k * t - self.scale * t ** self.alpha),
            0.0, np.inf, limit=200)
        if not math.isfinite(val) or err > 1e-8 * max(val, 1.0):
            raise NumericFailureError(f"moment({k}) quadrature failed for {self!r}")
        return 1.0 + k * val

    def tail_integral(self, x):
        x = max(float(x), 1.0)
        t_cap = (-math.log(TAIL_TRUNCATION) / self.scale) ** (1.0 / self.alpha)
        lx = math.log(x)
        if lx >= t_cap:
            # beyond the truncation point fall back to the geometric bound below
            lx_cap = lx
        else:
            lx_cap = t_cap
        val, err = integrate.quad(
            lambda t: math.exp(t - self.scale * t ** self.alpha),
            lx, lx_cap, limit=200, epsrel=1e-10)
        # For t >= L: t^alpha >= t * L^(alpha-1), hence the remainder beyond
        # the cap is at most T * F_bar(T) / (scale * L^(alpha-1) - 1).
        slope = self.scale * lx_cap ** (self.alpha - 1.0)
        if slope <= 1.0:
            raise NumericFailureError("tail integral does not converge fast enough")
        remainder = math.exp(lx_cap - self.scale * lx_cap ** self.alpha) / (slope - 1.0)
        return val + remainder

    def _params(self):
        return {"alpha": self.alpha, "scale": self.scale}


class WeibullType(TailModel):
    """Stretched-exponential tail exp(-x^alpha), 0 < alpha < 1.

    Included as the boundary family that the ratio machinery is expected to
    reject: its hazard grows too fast for hazard-scale insensitivity.
    """

    class_tag = "weibull_type"

    def __init__(self, alpha: float):
        if not (0 < alpha < 1):
            raise ParameterError(f"weibull-type exponent must lie in (0,1), got {alpha}")
        self.alpha = float(alpha)
        self.support_left = 0.0

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return _maybe_scalar(np.exp(-np.maximum(x, 0.0) ** self.alpha), x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        return _maybe_scalar(np.maximum(x, 0.0) ** self.alpha, x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        _check_prob_open(u)
        return _maybe_scalar((-np.log1p(-u)) ** (1.0 / self.alpha), u)

    def sample(self, rng, size):
        return rng.standard_exponential(size) ** (1.0 / self.alpha)

    def moment(self, k):
        return math.gamma(1.0 + k / self.alpha)

    def tail_integral(self, x):
        # int_x^inf exp(-t^alpha) dt = Gamma(1/alpha, x^alpha) / alpha
        x = max(float(x), 0.0)
        s = 1.0 / self.alpha
        z = x ** self.alpha
        if z < 600.0:
            return sc.gammaincc(s, z) * sc.gamma(s) / self.alpha
        # three-term asymptotic of the upper incomplete gamma
        series = 1.0 + (s - 1.0) / z + (s - 1.0) * (s - 2.0) / (z * z)
        return z ** (s - 1.0) * math.exp(-z) * series / self.alpha

    def _params(self):
        return {"alpha": self.alpha}


class TwoSided(TailModel):
    """Sign mixture: X = V with probability p_plus, X = -V with p_minus.

    The base model must be nonnegative. Both tails inherit the base shape, so
    P(X > x) / P(|X| > x) = p_plus exactly for x above the base support.
    """

    class_tag = "two_sided"

    def __init__(self, base: TailModel, p_plus: float, p_minus: float):
        if base.support_left < 0:
            raise ParameterError("two-sided base must be nonnegative")
        if p_plus < 0 or p_minus < 0 or abs(p_plus + p_minus - 1.0) > 1e-12:
            raise ParameterError("tail weights must be nonnegative and sum to 1")
        if p_plus == 0.0:
            raise ParameterError("p_plus must be positive for upper-tail work")
        self.base = base
        self.p_plus = float(p_plus)
        self.p_minus = float(p_minus)
        self.support_left = -math.inf if p_minus > 0 else base.support_left
        self.tail_index = base.tail_index

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x)
        out = np.empty_like(xv)
        pos = xv >= 0
        out[pos] = self.p_plus * np.atleast_1d(self.base.tail(xv[pos]))
        out[~pos] = 1.0 - self.p_minus * np.atleast_1d(self.base.tail(-xv[~pos]))
        return _maybe_scalar(out if x.ndim else out[0], x)

    def abs_tail(self, t):
        return self.base.tail(t)

    def abs_quantile(self, u):
        return self.base.quantile(u)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        _check_prob_open(u)
        uv = np.atleast_1d(u)
        v = 1.0 - uv
        out = np.empty_like(uv)
        upper = v <= self.p_plus
        arg = np.maximum(1.0 - v[upper] / self.p_plus, 1e-300)
        out[upper] = np.atleast_1d(self.base.quantile(arg))
        if np.any(~upper):
            arg = np.maximum(1.0 - uv[~upper] / self.p_minus, 1e-300)
            out[~upper] = -np.atleast_1d(self.base.quantile(arg))
        return _maybe_scalar(out if u.ndim else out[0], u)

    def sample(self, rng, size):
        v = self.base.sample(rng, size)
        signs = np.where(rng.random(size) < self.p_plus, 1.0, -1.0)
        return signs * v

    def moment(self, k):
        mk = self.base.moment(k)
        if k % 2 == 0:
            return mk
        if not math.isfinite(mk):
            return math.inf
        return (self.p_plus - self.p_minus) * mk

    def tail_integral(self, x):
        x = float(x)
        if x >= 0:
            return self.p_plus * self.base.tail_integral(x)
        # split at 0: int_x^0 (1 - p_minus * base.tail(-t)) dt + upper part
        ti0 = self.base.tail_integral(0.0)
        int_0_y = ti0 - self.base.tail_integral(-x)
        return (-x) - self.p_minus * int_0_y + self.p_plus * ti0

    def _params(self):
        return {"base": self.base, "p_plus": self.p_plus, "p_minus": self.p_minus}


class ScaleMixture(TailModel):
    """Finite positive scale mixture: P(X > x) = sum_i w_i * P(base > x / s_i)."""

    def __init__(self, base: TailModel, scales: Sequence[float], weights: Sequence[float]):
        scales = np.asarray(scales, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if scales.ndim != 1 or scales.size == 0 or np.any(scales <= 0):
            raise ParameterError("scales must be a nonempty positive vector")
        if weights.shape != scales.shape or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError("weights must match scales, be nonnegative, sum to 1")
        if base.support_left < 0:
            raise ParameterError("scale mixture base must be nonnegative")
        self.base = base
        self.scales = scales
        self.weights = weights
        self.class_tag = base.class_tag
        self.tail_index = base.tail_index
        self.support_left = float(scales.min()) * base.support_left

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x)
        for w, s in zip(self.weights, self.scales):
            acc += w * self.base.tail(x / s)
        return _maybe_scalar(acc, x)

    def quantile(self, u):
        return _invert_tail(self, u)

    def sample(self, rng, size):
        idx = rng.choice(self.scales.size, size=size, p=self.weights)
        v = self.base.sample(rng, size)
        return self.scales[idx] * v

    def moment(self, k):
        mk = self.base.moment(k)
        if not math.isfinite(mk):
            return math.inf
        return float(np.sum(self.weights * self.scales ** k)) * mk

    def tail_integral(self, x):
        return float(sum(w * s * self.base.tail_integral(float(x) / s)
                         for w, s in zip(self.weights, self.scales)))

    def _params(self):
        return {"base": self.base, "scales": self.scales.tolist(),
                "weights": self.weights.tolist()}


_HERMITE_NODES, _HERMITE_WEIGHTS = np.polynomial.hermite.hermgauss(80)


class LognormalScaleMixture(TailModel):
    """X = sigma * Z with log sigma ~ N(mu, s^2) independent of Z >= 0.

    For regularly varying Z this is the Breiman regime:
    P(X > x) ~ E[sigma^alpha] * P(Z > x). The exact tail is evaluated by
    Gauss-Hermite quadrature over the mixing normal.
    """

    def __init__(self, base: TailModel, mu: float, s: float):
        if not (s > 0):
            raise ParameterError("mixing sigma must be positive")
        if base.support_left < 0:
            raise ParameterError("mixture base must be nonnegative")
        self.base = base
        self.mu = float(mu)
        self.s = float(s)
        self.class_tag = base.class_tag
        self.tail_index = base.tail_index
        self.support_left = 0.0
        self._sigmas = np.exp(self.mu + self.s * math.sqrt(2.0) * _HERMITE_NODES)
        self._w = _HERMITE_WEIGHTS / math.sqrt(math.pi)

    def sigma_moment(self, k: float) -> float:
        return math.exp(k * self.mu + 0.5 * (k * self.s) ** 2)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.ravel(x)
        vals = self.base.tail(flat[:, None] / self._sigmas[None, :]) @ self._w
        return _maybe_scalar(vals.reshape(x.shape) if x.ndim else vals[0], x)

    def quantile(self, u):
        return _invert_tail(self, u)

    def sample(self, rng, size):
        sigma = np.exp(self.mu + self.s * rng.standard_normal(size))
        return sigma * self.base.sample(rng, size)

    def moment(self, k):
        mk = self.base.moment(k)
        if not math.isfinite(mk):
            return math.inf
        return self.sigma_moment(k) * mk

    def tail_integral(self, x):
        x = float(x)
        parts = np.asarray([self.base.tail_integral(x / s) for s in self._sigmas])
        return float(np.sum(self._w * self._sigmas * parts))

    def _params(self):
        return {"base": self.base, "mu": self.mu, "s": self.s}


# ---------------------------------------------------------------------------
# constructors (the public spelling used by the config layer and tests)


def make_pareto(alpha: float, x_m: float = 1.0) -> Pareto:
    return Pareto(alpha, x_m)


def make_lognormal(mu: float = 0.0, sigma: float = 1.0) -> Lognormal:
    return Lognormal(mu, sigma)


def make_logweibull(alpha: float, scale: float = 1.0) -> LogWeibull:
    return LogWeibull(alpha, scale)


def make_weibull_type(alpha: float) -> WeibullType:
    return WeibullType(alpha)


def make_two_sided(base: TailModel, p_plus: float, p_minus: float) -> TwoSided:
    return TwoSided(base, p_plus, p_minus)


def squared_model(model: TailModel) -> TailModel:
    """The law of X^2 (of |X|^2 for two-sided models), kept inside the family."""
    if isinstance(model, TwoSided):
        return squared_model(model.base)
    if isinstance(model, Pareto):
        return Pareto(model.alpha / 2.0, model.x_m ** 2)
    if isinstance(model, Lognormal):
        return Lognormal(2.0 * model.mu, 2.0 * model.sigma)
    if isinstance(model, LogWeibull):
        return LogWeibull(model.alpha, model.scale / 2.0 ** model.alpha)
    if isinstance(model, WeibullType):
        a = model.alpha / 2.0
        if not (0 < a < 1):
            raise UnsupportedCaseError("squared weibull-type leaves the family")
        return WeibullType(a)
    raise UnsupportedCaseError(f"no squared form for {type(model).__name__}")


# ---------------------------------------------------------------------------
# auxiliary (mean excess) machinery


@dataclass(frozen=True)
class AuxiliaryFunction:
    """A candidate auxiliary function a(x) with its provenance."""

    fn: Callable
    provenance: str          # "closed_form" | "numeric_integral"
    label: str = ""

    def __call__(self, x):
        return self.fn(x)


def mean_excess(model: TailModel, x: float) -> float:
    """a(x) = int_x^inf P(X > t) dt / P(X > x).

    The mean-excess function is the canonical auxiliary function for
    Gumbel-domain tails: P(X > x + y a(x)) / P(X > x) -> exp(-y).
    """
    x = float(x)
    if isinstance(model, Lognormal) and x > 0:
        return float(model.mean_excess_exact(x))
    tail = float(model.tail(x))
    if tail <= 0.0:
        raise ParameterError(f"tail vanishes at x={x}; mean excess undefined")
    return model.tail_integral(x) / tail


def mean_excess_function(model: TailModel) -> AuxiliaryFunction:
    closed = isinstance(model, (Pareto, Lognormal, WeibullType)) or (
        isinstance(model, TwoSided) and isinstance(model.base, (Pareto, Lognormal, WeibullType)))
    provenance = "closed_form" if closed else "numeric_integral"

    def fn(x):
        if np.ndim(x) == 0:
            return mean_excess(model, float(x))
        return np.asarray([mean_excess(model, float(v)) for v in np.asarray(x).ravel()],
                          dtype=float).reshape(np.shape(x))

    return AuxiliaryFunction(fn=fn, provenance=provenance, label="mean_excess")


def insensitivity_ratio(model: TailModel, g: Callable, c: float, x):
    """P(X > x - c g(x)) / P(X > x); tends to 1 when g grows slower than a(x)."""
    x = np.asarray(x, dtype=float)
    shifted = x - c * np.asarray(g(x), dtype=float)
    if np.any(shifted <= model.support_left):
        raise ParameterError("x - c*g(x) fell below the model support")
    out = model.tail(shifted) / model.tail(x)
    return _maybe_scalar(out, x)


def von_mises_reconstruct(model: TailModel, a: Callable, z: float, xs):
    """c(x) = P(X > x) * exp(int_z^x dt / a(t)) on an increasing grid.

    When a is a valid auxiliary function the sequence stabilises at a positive
    constant; a mismatched candidate drives it to 0 or infinity.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(np.diff(xs) <= 0):
        raise ParameterError("xs must be strictly increasing")
    if not (model.support_left < z <= xs[0]):
        raise ParameterError("need support < z <= xs[0]")
    out = np.empty_like(xs)
    acc = 0.0
    lo = float(z)
    for i, hi in enumerate(xs):
        seg, err = integrate.quad(lambda t: 1.0 / float(a(t)), lo, float(hi), limit=200)
        if not math.isfinite(seg):
            raise NumericFailureError("1/a quadrature diverged")
        acc += seg
        out[i] = float(model.tail(hi)) * math.exp(acc)
        lo = float(hi)
    return out


# ---------------------------------------------------------------------------
# internals


def _check_prob_open(u):
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ParameterError("probabilities must lie strictly inside (0, 1)")


def _invert_tail(model: TailModel, u):
    """Quantile via bracketed root finding on the tail, to ~1e-12 relative."""
    u = np.asarray(u, dtype=float)
    _check_prob_open(u)

    def solve_one(ui: float) -> float:
        v = 1.0 - ui
        lo = max(model.support_left, 1e-300)
        hi = max(2.0 * lo, 1.0)
        for _ in range(2000):
            if model.tail(hi) < v:
                break
            hi *= 2.0
        else:
            raise NumericFailureError("failed to bracket quantile from above")
        while model.tail(lo) <= v and lo > 1e-300:
            lo /= 2.0
        f = lambda t: model.tail(t) - v
        return float(optimize.brentq(f, lo, hi, xtol=1e-300, rtol=QUANTILE_RTOL))

    if u.ndim == 0:
        return solve_one(float(u))
    return np.asarray([solve_one(float(v)) for v in u.ravel()]).reshape(u.shape)


def _tail_integral_numeric(model: TailModel, x: float) -> float:
    """Generic int_x^inf F_bar in log space up to quantile(1 - 1e-14)."""
    cap = float(model.quantile(1.0 - TAIL_TRUNCATION))
    lo = max(x, model.support_left)
    head = lo - x                    # region below the support where tail == 1
    if lo >= cap:
        return head
    if lo <= 0:
        # families reaching this path are nonnegative; tail ~ 1 near 0
        lo = min(cap * 1e-12, 1e-12)
        head += lo
    val, err = integrate.quad(
        lambda t: float(model.tail(math.exp(t))) * math.exp(t),
        math.log(lo), math.log(cap), limit=400, epsrel=1e-10)
    if err > 1e-6 * max(val, 1e-300):
        raise NumericFailureError("tail integral quadrature did not converge")
    # remainder beyond the cap: F_bar(cap) * local exponential scale
    slope = _hazard_slope(model, cap)
    remainder = float(model.tail(cap)) / slope if slope > 0 else 0.0
    return head + val + remainder


def _hazard_slope(model: TailModel, x: float) -> float:
    h = 1e-5 * x
    return max((float(model.hazard_integral(x + h)) -
                float(model.hazard_integral(x - h))) / (2 * h), 0.0)
