"""Exact stationary samplers for m-dependent heavy-tailed processes.

Every construction draws a path of length n from a noise window of length
n + m, so the law of (X_1..X_n) is the stationary law with no burn-in. Each
model exposes its dependence range m, its marginal law (analytic where the
construction admits one, an approximate wrapper otherwise), its exact mean,
and lagged autocovariances (closed form where cheap, deterministic
quadrature or a fixed-seed Monte Carlo pre-pass otherwise).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy import special as sc

from . import dist
from .dist import (
    LogWeibull, LognormalScaleMixture, ScaleMixture, TailModel, TwoSided,
    _invert_tail, _maybe_scalar,
)
from .errors import DegenerateDependenceError, ParameterError, UnsupportedCaseError

__all__ = [
    "ProcessModel", "GaussianPowerTail", "MinShiftTail", "ApproxLinearTail",
    "make_iid", "make_gaussian_transform", "make_min_construction",
    "make_stoch_vol", "make_linear", "make_sv_regvar", "make_comonotone",
    "theta_from_rho", "sample_path", "sample_pair",
]

_AUTOCOV_SEED = 0x5EED_AC0F   # fixed internal seed for MC autocovariance
_AUTOCOV_REPS = 1 << 19


# ---------------------------------------------------------------------------
# marginal models specific to the constructions


class GaussianPowerTail(TailModel):
    """Law of exp(sign(Y)|Y|^alpha) for Y ~ N(0,1), alpha in (0, 2).

    P(X > x) = Phi_bar(sign(log x)|log x|^(1/alpha)) for x > 0; the hazard
    grows like (log x)^(2/alpha)/2, slower than any power of x.
    """

    class_tag = "lognormal_type"

    def __init__(self, alpha: float):
        if not (0 < alpha < 2):
            raise ParameterError(f"transform exponent must lie in (0,2), got {alpha}")
        self.alpha = float(alpha)
        self.support_left = 0.0

    def _y_of_logx(self, lx):
        return np.sign(lx) * np.abs(lx) ** (1.0 / self.alpha)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x)
        out = np.ones_like(xv)
        pos = xv > 0
        out[pos] = sc.ndtr(-self._y_of_logx(np.log(xv[pos])))
        return _maybe_scalar(out if x.ndim else out[0], x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        xv = np.atleast_1d(x)
        out = np.zeros_like(xv)
        pos = xv > 0
        out[pos] = -sc.log_ndtr(-self._y_of_logx(np.log(xv[pos])))
        return _maybe_scalar(out if x.ndim else out[0], x)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ParameterError("probabilities must lie strictly inside (0, 1)")
        y = sc.ndtri(u)
        return _maybe_scalar(np.exp(np.sign(y) * np.abs(y) ** self.alpha), u)

    def sample(self, rng, size):
        y = rng.standard_normal(size)
        return np.exp(np.sign(y) * np.abs(y) ** self.alpha)

    def moment(self, k):
        # peak exponent of k y^alpha - y^2/2; finite but can exceed the
        # double range as alpha approaches 2
        y_star = (k * self.alpha) ** (1.0 / (2.0 - self.alpha))
        if k * y_star ** self.alpha - 0.5 * y_star ** 2 > 700.0:
            return math.inf

        def integrand(y):
            return math.exp(k * math.copysign(abs(y) ** self.alpha, y)
                            - 0.5 * y * y) / math.sqrt(2 * math.pi)
        lo, _ = integrate.quad(integrand, -np.inf, 0.0, limit=400)
        hi, _ = integrate.quad(integrand, 0.0, np.inf, limit=400)
        return lo + hi

    def _params(self):
        return {"alpha": self.alpha}


class MinShiftTail(TailModel):
    """Law of min_j a_j Y_j over m+1 iid copies of a positive noise model.

    P(X > x) = prod_j P(Y > x/a_j) = exp(-sum_j S_Y(x/a_j)); exact.
    """

    def __init__(self, base: TailModel, a: Sequence[float]):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
            raise ParameterError("min-construction coefficients must be positive")
        if base.support_left < 0:
            raise ParameterError("min-construction noise must be nonnegative")
        self.base = base
        self.a = a
        self.class_tag = base.class_tag
        self.support_left = float(a.min()) * base.support_left

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x, dtype=float)
        for aj in self.a:
            acc = acc + self.base.hazard_integral(x / aj)
        return _maybe_scalar(np.exp(-acc), x)

    def hazard_integral(self, x):
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x, dtype=float)
        for aj in self.a:
            acc = acc + self.base.hazard_integral(x / aj)
        return _maybe_scalar(acc, x)

    def quantile(self, u):
        return _invert_tail(self, u)

    def sample(self, rng, size):
        shape = (size,) if np.isscalar(size) else tuple(size)
        y = self.base.sample(rng, shape + (self.a.size,))
        return np.min(self.a * y, axis=-1)

    def moment(self, k):
        return _moment_from_tail(self, k)

    def _params(self):
        return {"base": self.base, "a": self.a.tolist()}


class ApproxLinearTail(TailModel):
    """Marginal of a finite linear filter X = sum_j psi_j Z_j.

    Sampling and first two moments are exact; the analytic tail is the
    heavy-tail approximation (k_plus p_plus + k_minus p_minus) P(|Z| > x),
    clipped to [0,1]. Callers needing exactness must sample.
    """

    tail_is_exact = False

    def __init__(self, noise: TailModel, psi: Sequence[float]):
        psi = np.asarray(psi, dtype=float)
        self.noise = noise
        self.psi = psi
        self.k_plus = int(np.sum(psi == 1.0))
        self.k_minus = int(np.sum(psi == -1.0))
        self.class_tag = noise.class_tag
        self.tail_index = noise.tail_index
        self.support_left = -math.inf
        self._front = self.k_plus * noise.p_plus + self.k_minus * noise.p_minus

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        out = np.minimum(self._front * np.asarray(self.noise.abs_tail(np.maximum(x, 0.0))), 1.0)
        return _maybe_scalar(out, x)

    def quantile(self, u):
        return _invert_tail(self, u)

    def sample(self, rng, size):
        z = self.noise.sample(rng, (size, self.psi.size))
        return z @ self.psi

    def moment(self, k):
        if k == 1:
            return float(self.psi.sum()) * self.noise.mean
        if k == 2:
            var = float(np.sum(self.psi ** 2)) * self.noise.variance
            return var + self.moment(1) ** 2
        raise ParameterError("only the first two moments are tracked for filters")

    def _params(self):
        return {"noise": self.noise, "psi": self.psi.tolist()}


def _moment_from_tail(model: TailModel, k: int) -> float:
    """E[X^k] = k int_0^inf x^(k-1) tail(x) dx for nonnegative models."""
    if model.support_left < 0:
        raise ParameterError("moment_from_tail needs a nonnegative model")
    cap = float(model.quantile(1.0 - dist.TAIL_TRUNCATION))
    lo = max(model.support_left, min(cap * 1e-12, 1e-12))
    head = lo ** k
    val, _ = integrate.quad(
        lambda t: k * math.exp(k * t) * float(model.tail(math.exp(t))),
        math.log(lo), math.log(cap), limit=400, epsrel=1e-10)
    slope = dist._hazard_slope(model, cap)
    rem = k * cap ** (k - 1) * float(model.tail(cap)) / slope if slope > 0 else 0.0
    return head + val + rem


# ---------------------------------------------------------------------------
# process models


class ProcessModel:
    """A stationary m-dependent construction with exact windowed sampling."""

    kind: str = ""

    def __init__(self, m: int, marginal: TailModel | None, params: dict):
        self.m = int(m)
        self.marginal = marginal
        self.params = params
        self._autocov_cache: dict[int, float] = {}

    # subclasses implement the exact stationary path sampler
    def sample_paths(self, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        if self.marginal is not None:
            return self.marginal.mean
        raise NotImplementedError

    def autocovariance(self, h: int) -> float:
        """gamma(h); closed form where available, else fixed-seed MC pre-pass."""
        h = abs(int(h))
        if h > self.m:
            return 0.0
        if h not in self._autocov_cache:
            self._autocov_cache[h] = self._autocov(h)
        return self._autocov_cache[h]

    def _autocov(self, h: int) -> float:
        if h == 0 and self.marginal is not None:
            return self.marginal.variance
        return self._autocov_mc(h)

    def _autocov_mc(self, h: int) -> float:
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=_AUTOCOV_SEED, spawn_key=(h,)))
        mu = self.mean
        total = 0.0
        done = 0
        while done < _AUTOCOV_REPS:
            block = min(1 << 16, _AUTOCOV_REPS - done)
            paths = self.sample_paths(h + 1, block, rng)
            total += float(np.sum((paths[:, 0] - mu) * (paths[:, h] - mu)))
            done += block
        return total / _AUTOCOV_REPS

    def sum_variance(self, n: int) -> float:
        """Var(S_n) under stationarity: n*(gamma(0) + 2 sum_h gamma(h))."""
        gamma0 = self.autocovariance(0)
        tail = sum(self.autocovariance(h) for h in range(1, self.m + 1))
        return n * (gamma0 + 2.0 * tail)

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, params={self.params})"


class IIDProcess(ProcessModel):
    kind = "iid"

    def __init__(self, marginal: TailModel):
        super().__init__(0, marginal, {"marginal": repr(marginal)})

    def sample_paths(self, n, size, rng):
        return self.marginal.sample(rng, (size, n))

    def _autocov(self, h):
        return self.marginal.variance if h == 0 else 0.0


class GaussianTransformProcess(ProcessModel):
    """X_i = exp(sign(Y_i)|Y_i|^alpha), Y a unit-variance Gaussian MA(m)."""

    kind = "gaussian_transform"

    def __init__(self, theta: Sequence[float], alpha: float):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size == 0:
            raise ParameterError("theta must be a nonempty vector")
        norm = float(np.sum(theta ** 2))
        if norm <= 0:
            raise ParameterError("theta must not be all zero")
        theta = theta / math.sqrt(norm)
        m = theta.size - 1
        rho = np.array([float(theta[: theta.size - h] @ theta[h:]) for h in range(m + 1)])
        if np.any(np.abs(rho[1:]) >= 1.0 - 1e-10):
            raise DegenerateDependenceError("MA correlation at some lag is 1")
        self.theta = theta
        self.rho = rho
        self.alpha = float(alpha)
        marginal = GaussianPowerTail(alpha)
        super().__init__(m, marginal, {"theta": theta.tolist(), "alpha": alpha})

    def _gaussian_paths(self, n, size, rng):
        xi = rng.standard_normal((size, n + self.m))
        if self.m == 0:
            return xi * self.theta[0]
        win = np.lib.stride_tricks.sliding_window_view(xi, self.m + 1, axis=1)
        return win @ self.theta

    def sample_paths(self, n, size, rng):
        y = self._gaussian_paths(n, size, rng)
        if self.alpha == 1.0:
            return np.exp(y)
        return np.exp(np.sign(y) * np.abs(y) ** self.alpha)

    def _autocov(self, h):
        if h == 0:
            return self.marginal.variance
        # E[X_0 X_h] by rotating the correlated pair into independent axes
        r = float(self.rho[h])
        cp, cm = math.sqrt((1 + r) / 2.0), math.sqrt((1 - r) / 2.0)
        nodes, weights = np.polynomial.hermite.hermgauss(160)
        u = math.sqrt(2.0) * nodes
        w = weights / math.sqrt(math.pi)

        def f(y):
            return np.exp(np.sign(y) * np.abs(y) ** self.alpha)

        y0 = cp * u[:, None] + cm * u[None, :]
        yh = cp * u[:, None] - cm * u[None, :]
        exy = float(w @ (f(y0) * f(yh)) @ w)
        return exy - self.marginal.mean ** 2


class MinConstructionProcess(ProcessModel):
    """X_i = min(a_0 Y_i, ..., a_m Y_{i+m}) over positive iid noise."""

    kind = "min_construction"

    def __init__(self, a: Sequence[float], noise: TailModel):
        a = np.asarray(a, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
            raise ParameterError("coefficients a must be positive")
        if noise.support_left < 0:
            raise ParameterError("min-construction noise must be nonnegative")
        self.a = a
        self.noise = noise
        m = a.size - 1
        if np.all(a == 1.0) and isinstance(noise, LogWeibull):
            marginal: TailModel = LogWeibull(noise.alpha, noise.scale * a.size)
        else:
            marginal = MinShiftTail(noise, a)
        super().__init__(m, marginal, {"a": a.tolist(), "noise": repr(noise)})

    def sample_paths(self, n, size, rng):
        y = self.noise.sample(rng, (size, n + self.m))
        out = self.a[0] * y[:, :n]
        for j in range(1, self.m + 1):
            np.minimum(out, self.a[j] * y[:, j:j + n], out=out)
        return out


class StochVolProcess(ProcessModel):
    """X_i = sigma_i Z_i: iid noise scaled by a finite-law volatility.

    sigma_i has the exact given mixture marginal; with sigma_m > 0 the
    volatilities are made m-dependent through a rolling window maximum whose
    probability transform restores the exact marginal law.
    """

    kind = "stoch_vol"

    def __init__(self, scales, weights, noise: TailModel, sigma_m: int = 0):
        scales = np.asarray(scales, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if np.any(scales <= 0):
            raise ParameterError("volatility support must be positive")
        if sigma_m < 0:
            raise ParameterError("sigma_m must be >= 0")
        if isinstance(noise, TwoSided):
            marginal: TailModel = TwoSided(ScaleMixture(noise.base, scales, weights),
                                           noise.p_plus, noise.p_minus)
        else:
            marginal = ScaleMixture(noise, scales, weights)
        self.scales = scales
        self.weights = weights
        self.noise = noise
        self.sigma_m = int(sigma_m)
        self._cumw = np.cumsum(weights)
        super().__init__(self.sigma_m, marginal,
                         {"scales": scales.tolist(), "weights": weights.tolist(),
                          "noise": repr(noise), "sigma_m": sigma_m})

    def _sigma_paths(self, n, size, rng):
        k = self.sigma_m
        eta = rng.random((size, n + k))
        if k == 0:
            v = eta
        else:
            win = np.lib.stride_tricks.sliding_window_view(eta, k + 1, axis=1)
            v = np.max(win, axis=2) ** (k + 1)      # uniform marginal again
        idx = np.minimum(np.searchsorted(self._cumw, v, side="right"),
                         self.scales.size - 1)
        return self.scales[idx]

    def sample_paths(self, n, size, rng):
        sigma = self._sigma_paths(n, size, rng)
        z = self.noise.sample(rng, (size, n))
        return sigma * z

    def _autocov(self, h):
        if h == 0:
            return self.marginal.variance
        if self.noise.mean == 0.0:
            return 0.0          # E[X_0 X_h] = E[sigma_0 sigma_h] E[Z]^2
        return self._autocov_mc(h)


class SVRegVarProcess(ProcessModel):
    """X_i = sigma_i Z_i with iid lognormal sigma and regularly varying Z.

    P(|X| > x) ~ E[sigma^alpha] P(|Z| > x) (Breiman); the constant is closed
    form for lognormal volatility.
    """

    kind = "sv_regvar"

    def __init__(self, mu: float, s: float, noise: TailModel):
        if noise.tail_index is None:
            raise ParameterError("sv_regvar noise must be regularly varying")
        if isinstance(noise, TwoSided):
            marginal: TailModel = TwoSided(
                LognormalScaleMixture(noise.base, mu, s), noise.p_plus, noise.p_minus)
            self._abs_mix = marginal.base
        else:
            marginal = LognormalScaleMixture(noise, mu, s)
            self._abs_mix = marginal
        self.mu = float(mu)
        self.s = float(s)
        self.noise = noise
        super().__init__(0, marginal, {"mu": mu, "s": s, "noise": repr(noise)})

    @property
    def breiman_constant(self) -> float:
        a = self.noise.tail_index
        return math.exp(a * self.mu + 0.5 * (a * self.s) ** 2)

    def sample_paths(self, n, size, rng):
        sigma = np.exp(self.mu + self.s * rng.standard_normal((size, n)))
        z = self.noise.sample(rng, (size, n))
        return sigma * z

    def _autocov(self, h):
        return self.marginal.variance if h == 0 else 0.0


class LinearProcess(ProcessModel):
    """Finite moving-average filter X_i = sum_j psi_j Z_{i+j} of iid noise."""

    def __init__(self, psi: Sequence[float], noise: TailModel,
                 kind: str = "linear_finite", truncation_error: float = 0.0,
                 rule_repr: str | None = None):
        psi = np.asarray(psi, dtype=float)
        if psi.ndim != 1 or psi.size == 0:
            raise ParameterError("psi must be a nonempty vector")
        if np.max(np.abs(psi)) <= 0:
            raise ParameterError("psi must not be all zero")
        self.psi = psi
        self.noise = noise
        self.kind = kind
        self.truncation_error = float(truncation_error)
        marginal = ApproxLinearTail(noise, psi)
        params = {"psi": psi.tolist(), "noise": repr(noise)}
        if rule_repr:
            params["rule"] = rule_repr
            params["truncation_error"] = truncation_error
        super().__init__(psi.size - 1, marginal, params)

    @property
    def mean(self):
        return float(self.psi.sum()) * self.noise.mean

    def sample_paths(self, n, size, rng):
        z = self.noise.sample(rng, (size, n + self.m))
        if self.m == 0:
            return z * self.psi[0]
        win = np.lib.stride_tricks.sliding_window_view(z, self.m + 1, axis=1)
        return win @ self.psi

    def _autocov(self, h):
        ps = self.psi
        overlap = float(ps[: ps.size - h] @ ps[h:])
        return overlap * self.noise.variance


class ComonotoneProcess(ProcessModel):
    """Negative-control construction: every X_i in a path is the same draw.

    Deliberately violates lag independence at all lags so that the joint
    tail checkers have a construction they must reject.
    """

    kind = "comonotone"

    def __init__(self, marginal: TailModel, m: int = 1):
        if m < 1:
            raise ParameterError("comonotone control needs m >= 1")
        super().__init__(m, marginal, {"marginal": repr(marginal)})

    def sample_paths(self, n, size, rng):
        x = self.marginal.sample(rng, (size, 1))
        return np.broadcast_to(x, (size, n)).copy()

    def _autocov(self, h):
        return self.marginal.variance


class ClippedIIDProcess(ProcessModel):
    """Iid draws from a symmetric two-sided base, winsorized to [-c, c].

    Bounded mean-zero summands for the sum-bound evaluators. The clipped law
    leaves the tail-model family, so no marginal is exposed; the exact zero
    mean needs the base symmetric.
    """

    kind = "clipped_iid"

    def __init__(self, base: TailModel, c: float):
        if c <= 0:
            raise ParameterError("clip bound c must be positive")
        if not isinstance(base, TwoSided) or base.p_plus != base.p_minus:
            raise UnsupportedCaseError(
                "clipping keeps an exact zero mean only for symmetric"
                " two-sided bases")
        super().__init__(0, None, {"base": repr(base), "c": float(c)})
        self.base = base
        self.c = float(c)

    def sample_paths(self, n, size, rng):
        return np.clip(self.base.sample(rng, (size, n)), -self.c, self.c)

    @property
    def mean(self) -> float:
        return 0.0

    def _autocov(self, h):
        if h:
            return 0.0
        # E[min(X^2, c^2)] = int_0^{c^2} P(X^2 > s) ds
        val, _ = integrate.quad(lambda s: float(self.base.abs_tail(math.sqrt(s))),
                                0.0, self.c ** 2, limit=200)
        return val


# ---------------------------------------------------------------------------
# constructors


def make_iid(marginal: TailModel) -> ProcessModel:
    return IIDProcess(marginal)


def make_gaussian_transform(theta, alpha: float) -> ProcessModel:
    return GaussianTransformProcess(theta, alpha)


def make_min_construction(a, noise: TailModel | None = None) -> ProcessModel:
    if noise is None:
        noise = LogWeibull(2.0)
    return MinConstructionProcess(a, noise)


def make_stoch_vol(scales, weights, noise: TailModel, sigma_m: int = 0) -> ProcessModel:
    return StochVolProcess(scales, weights, noise, sigma_m)


def make_linear(psi, noise: TailModel, truncation_tol: float = 0.0) -> ProcessModel:
    """Finite filter from an explicit psi vector, or a truncated infinite one.

    psi may be a coefficient vector or an object with a
    `truncate(tol) -> (coefficients, residual_bound)` method (see
    linproc.GeometricRule); the truncation point is chosen so the residual
    delta-norm bound is at most truncation_tol.
    """
    if hasattr(psi, "truncate"):
        coeffs, residual = psi.truncate(truncation_tol)
        return LinearProcess(coeffs, noise, kind="linear_truncated",
                             truncation_error=residual, rule_repr=repr(psi))
    return LinearProcess(psi, noise, kind="linear_finite")


def make_sv_regvar(mu: float, s: float, noise: TailModel) -> ProcessModel:
    return SVRegVarProcess(mu, s, noise)


def make_comonotone(marginal: TailModel, m: int = 1) -> ProcessModel:
    return ComonotoneProcess(marginal, m)


def make_clipped_iid(base: TailModel, c: float) -> ProcessModel:
    return ClippedIIDProcess(base, c)


# ---------------------------------------------------------------------------
# plumbing


def sample_path(process: ProcessModel, n: int, rng: np.random.Generator):
    """One exact stationary path of length n."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return process.sample_paths(n, 1, rng)[0]


def sample_pair(process: ProcessModel, h: int, rng: np.random.Generator):
    """One exact draw of (X_0, X_h)."""
    x0, xh = sample_pairs(process, h, 1, rng)[0]
    return float(x0), float(xh)


def sample_pairs(process: ProcessModel, h: int, size: int, rng: np.random.Generator):
    """(size, 2) array of exact (X_0, X_h) draws from the construction."""
    if not (0 <= h):
        raise ParameterError("lag must be nonnegative")
    paths = process.sample_paths(h + 1, size, rng)
    return paths[:, [0, h]] if h > 0 else np.column_stack([paths[:, 0], paths[:, 0]])


def theta_from_rho(rho) -> np.ndarray:
    """MA(m) coefficients (normalized, theta_0 > 0) matching target lag
    correlations rho(1..m), by numeric spectral factorization.

    Rejects correlation sequences not attainable by any MA(m), e.g.
    rho(1) > 0.5 at m=1.
    """
    from scipy import optimize

    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or rho.size == 0:
        raise ParameterError("rho must be a nonempty vector of lag correlations")
    if np.any(np.abs(rho) >= 1.0):
        raise ParameterError("correlations must lie in (-1, 1)")
    m = rho.size

    def resid(theta):
        acf = np.array([theta[: m + 1 - h] @ theta[h:] for h in range(m + 1)])
        return np.concatenate([[acf[0] - 1.0], acf[1:] - rho])

    best = None
    starts = [np.concatenate([[1.0], rho]),
              np.concatenate([[1.0], 0.5 * rho]),
              np.ones(m + 1)]
    for s0 in starts:
        s0 = s0 / np.linalg.norm(s0)
        sol = optimize.least_squares(resid, s0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or sol.cost < best.cost:
            best = sol
    theta = best.x
    if math.sqrt(2.0 * best.cost) > 1e-8:
        raise ParameterError(f"rho={rho.tolist()} is not attainable by an MA({m})")
    theta = theta / np.linalg.norm(theta)
    if theta[0] < 0:
        theta = -theta
    return theta
