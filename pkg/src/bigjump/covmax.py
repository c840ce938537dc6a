"""Maxima of sample covariance entries for iid heavy-tailed rows.

A p x n data matrix with iid rows from a stationary process has
S_ij = sum_t X_it X_jt. The diagonal maxima, centered at n E[X^2] and
normalized by the (np)-th tail constants of X^2, converge to a Frechet law
when X^2 has a regularly varying tail with index above 2, and to a Gumbel
law in the lognormal-type regime; off-diagonal maxima vanish under the same
normalization. This module computes the constants, streams the simulations
with deterministic blocking, and measures KS distances to the limit laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _parallel
from ._stats import ks_distance as _ks
from .dist import TailModel, squared_model
from .errors import InfeasibleError, ParameterError, UnsupportedCaseError

__all__ = [
    "CovMaxSample", "CovMaxResult",
    "gumbel_constants", "frechet_constants", "dimension_rule",
    "simulate_covmax", "ks_distance", "gumbel_cdf", "frechet_cdf",
]

LAW_FRECHET = "frechet"
LAW_GUMBEL = "gumbel"
PAIR_FULL_MAX_P = 512      # full off-diagonal max up to here, subsample beyond
TIME_CHUNK = 4096          # accumulation chunk along the time axis
DEFAULT_FLOP_BUDGET = 5e13
DEFAULT_MEM_BUDGET = 1 << 31   # bytes for one replication's row matrix


@dataclass(frozen=True)
class CovMaxSample:
    diag_max_normalized: float
    offdiag_max_normalized: float | None
    p: int
    n: int
    constants: dict


@dataclass
class CovMaxResult:
    diag: np.ndarray                 # (reps,) normalized diagonal maxima
    offdiag: np.ndarray | None       # (reps,) normalized off-diagonal maxima
    p: int
    n: int
    law: str
    constants: dict                  # c_np (+ d_np for the Gumbel law)
    pair_coverage: float             # fraction of pairs entering the off-diag max
    meta: dict = field(default_factory=dict)

    def samples(self):
        out = []
        for i, d in enumerate(self.diag):
            off = None if self.offdiag is None else float(self.offdiag[i])
            out.append(CovMaxSample(float(d), off, self.p, self.n,
                                    self.constants))
        return out

    def csv_rows(self):
        rows = [["rep", "diag_max_norm", "offdiag_max_norm"]]
        for i, d in enumerate(self.diag):
            off = "" if self.offdiag is None else repr(float(self.offdiag[i]))
            rows.append([str(i), repr(float(d)), off])
        return rows

    def as_dict(self):
        out = {
            "p": self.p, "n": self.n, "law": self.law,
            "constants": {k: float(v) for k, v in self.constants.items()},
            "reps": int(self.diag.size),
            "pair_coverage": self.pair_coverage,
            "ks_diag": ks_distance(self.diag, self.law,
                                   alpha=self.meta.get("limit_alpha")),
        }
        if self.offdiag is not None:
            out["offdiag_frac_above_half"] = float(np.mean(self.offdiag > 0.5))
        out.update({k: v for k, v in self.meta.items()
                    if isinstance(v, (int, float, str, bool))})
        return out


# ---------------------------------------------------------------------------
# norming constants


def gumbel_constants(n: int) -> tuple[float, float]:
    """(c_n, d_n) for the squared standard lognormal regime:
    d_n = exp(2(sqrt(2 log n) - (log 4pi + log log n)/(2 sqrt(2 log n)))),
    c_n = 2 (2 log n)^(-1/2) d_n.
    """
    if n < 3:
        raise ParameterError("gumbel_constants needs n >= 3")
    s = math.sqrt(2.0 * math.log(n))
    d = math.exp(2.0 * (s - (math.log(4.0 * math.pi) + math.log(math.log(n)))
                        / (2.0 * s)))
    return 2.0 * d / s, d


def frechet_constants(x2_tail: TailModel, n: int) -> float:
    """c_n with n P(X^2 > c_n) = 1: the 1 - 1/n quantile of the squared law.

    The squared tail must be regularly varying with index above 2.
    """
    a = x2_tail.tail_index
    if a is None or a <= 2.0:
        raise UnsupportedCaseError(
            "squared law must be regularly varying with tail index above 2")
    if n < 1:
        raise ParameterError("n must be positive")
    # n = 1 degenerates to the base of the support; the open-interval
    # quantile guard forces the limit through the smallest positive float
    u = 1.0 - 1.0 / n if n > 1 else float(np.nextafter(0.0, 1.0))
    return float(x2_tail.quantile(u))


def dimension_rule(regime: str, n: int, params: dict | None = None) -> int:
    """Admissible dimension for the diag-max limit.

    frechet: p = ceil(n^beta), beta > alpha/4 - 1 (strict).
    gumbel:  p = ceil(K exp(C (log n)^2) / n), C > 1/16 (strict), K > 0.
    """
    params = dict(params or {})
    key = regime.strip().lower()
    if n < 3:
        raise ParameterError("n must be at least 3")
    if key == LAW_FRECHET:
        alpha = float(params.get("alpha", 0.0))
        beta = float(params.get("beta", 0.0))
        if alpha <= 4.0:
            raise ParameterError("frechet dimension rule needs alpha > 4")
        if beta <= alpha / 4.0 - 1.0:
            raise ParameterError(
                f"beta must exceed alpha/4 - 1 = {alpha / 4.0 - 1.0:.6g}")
        if beta <= 0.0:
            raise ParameterError("beta must be positive")
        return int(math.ceil(n ** beta))
    if key == LAW_GUMBEL:
        C = float(params.get("C", 0.0))
        K = float(params.get("K", 1.0))
        if C <= 1.0 / 16.0:
            raise ParameterError("C must exceed 1/16 (boundary excluded)")
        if K <= 0.0:
            raise ParameterError("K must be positive")
        return max(2, int(math.ceil(K * math.exp(C * math.log(n) ** 2) / n)))
    raise ParameterError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------------------
# limit laws


def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def frechet_cdf(x, alpha: float):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape if x.ndim else (1,))
    xv = np.atleast_1d(x)
    pos = xv > 0
    out[pos] = np.exp(-xv[pos] ** (-alpha))
    return out if x.ndim else float(out[0])


def ks_distance(samples, law: str, alpha: float | None = None) -> float:
    """Sup distance between the empirical CDF and the named limit law."""
    key = law.strip().lower()
    if key == LAW_GUMBEL:
        return _ks(samples, gumbel_cdf)
    if key == LAW_FRECHET:
        if alpha is None or alpha <= 0:
            raise ParameterError("frechet limit needs a positive alpha")
        return _ks(samples, lambda x: frechet_cdf(x, alpha))
    raise ParameterError(f"unknown limit law {law!r}")


# ---------------------------------------------------------------------------
# simulation


def _block_size_for(p: int, n: int) -> int:
    # keep one block's row matrices around 16 MB
    return max(1, min(64, (1 << 21) // max(p * n, 1)))


def _diag_from_rows(x: np.ndarray) -> np.ndarray:
    # sum of squares along time, accumulated in fixed chunks
    n = x.shape[1]
    out = np.zeros(x.shape[0])
    for t0 in range(0, n, TIME_CHUNK):
        xc = x[:, t0:t0 + TIME_CHUNK]
        out += (xc * xc).sum(axis=1)
    return out


def _gram_from_rows(x: np.ndarray) -> np.ndarray:
    n = x.shape[1]
    g = np.zeros((x.shape[0], x.shape[0]))
    for t0 in range(0, n, TIME_CHUNK):
        xc = x[:, t0:t0 + TIME_CHUNK]
        g += xc @ xc.T
    return g


def _covmax_block(index, block_reps, seed, process, p, n, mu, mu2, mode,
                  pairs_i, pairs_j, row_chunk):
    """mode: 'gram' (full off-diag), 'pairs' (subsampled off-diag),
    'diag' (no off-diag, row-streamed)."""
    rng = _parallel.block_rng(seed, index)
    diag_out = np.empty(block_reps)
    off_out = np.empty(block_reps) if mode != "diag" else None
    center_off = n * mu * mu
    for r in range(block_reps):
        if mode == "diag":
            best = -np.inf
            for i0 in range(0, p, row_chunk):
                rows = process.sample_paths(n, min(row_chunk, p - i0), rng)
                best = max(best, float(_diag_from_rows(rows).max()))
            diag_out[r] = best
            continue
        x = process.sample_paths(n, p, rng)
        # the diagonal uses the same accumulation as the row-streamed path,
        # so it never depends on whether off-diagonal maxima were requested
        diag_out[r] = float(_diag_from_rows(x).max())
        if mode == "gram":
            g = _gram_from_rows(x)
            iu = np.triu_indices(p, k=1)
            off_out[r] = float(np.abs(g[iu] - center_off).max())
        else:
            dots = np.einsum("ij,ij->i", x[pairs_i], x[pairs_j])
            off_out[r] = float(np.abs(dots - center_off).max())
    return diag_out, off_out


def _select_pairs(p: int, budget: int, seed: int):
    """Deterministic uniform subsample of index pairs i < j."""
    total = p * (p - 1) // 2
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(0xFA1F,)))
    flat = rng.choice(total, size=budget, replace=False)
    flat = np.sort(flat)
    # invert the row-major upper-triangle enumeration
    i = (p - 2 - np.floor(np.sqrt(-8.0 * flat + 4 * p * (p - 1) - 7) / 2.0
                          - 0.5)).astype(np.int64)
    j = (flat + i + 1 - i * (2 * p - i - 1) // 2).astype(np.int64)
    return i, j


def simulate_covmax(row_process, p: int, n: int, reps: int, law: str,
                    rng_seed: int = 0, workers: int = 1,
                    include_offdiag: bool = True,
                    pair_budget: int | None = None,
                    flop_budget: float = DEFAULT_FLOP_BUDGET,
                    mem_budget: int = DEFAULT_MEM_BUDGET) -> CovMaxResult:
    """Per-replication normalized maxima of S_ii and |S_ij|, i < j.

    Centering uses the exact model moments n E[X^2] (diag) and n (E[X])^2
    (off-diag); the norming constants are evaluated at the product n*p.
    Off-diagonal maxima run over all pairs up to p = 512 and over a
    deterministic uniform pair subsample beyond (coverage reported).
    """
    key = law.strip().lower()
    if key not in (LAW_FRECHET, LAW_GUMBEL):
        raise ParameterError(f"unknown limit law {law!r}")
    if p < 1 or n < 1 or reps < 1:
        raise ParameterError("p, n, reps must be positive")
    marginal = row_process.marginal
    if marginal is None:
        raise UnsupportedCaseError("row process exposes no marginal model")
    mu = float(marginal.mean)
    mu2 = float(marginal.moment(2))
    if not math.isfinite(mu2):
        raise UnsupportedCaseError("E[X^2] must be finite for the centering")

    meta: dict = {}
    if key == LAW_FRECHET:
        x2 = squared_model(marginal)
        c_np = frechet_constants(x2, n * p)
        constants = {"c_np": c_np}
        meta["limit_alpha"] = float(x2.tail_index)
    else:
        c_np, d_np = gumbel_constants(n * p)
        constants = {"c_np": c_np, "d_np": d_np}

    do_off = include_offdiag and p >= 2
    mode = "diag"
    pairs_i = pairs_j = None
    coverage = 0.0
    pair_flops = 0.0
    if do_off:
        bytes_needed = 8 * p * n
        if bytes_needed > mem_budget:
            raise InfeasibleError(
                f"one replication's row matrix needs {bytes_needed:.3g} bytes,"
                f" over the budget {mem_budget:.3g}; rerun without the"
                " off-diagonal maxima or raise the budget")
        if p <= PAIR_FULL_MAX_P:
            mode = "gram"
            coverage = 1.0
            pair_flops = float(p) * p * n
        else:
            mode = "pairs"
            total = p * (p - 1) // 2
            budget = pair_budget or PAIR_FULL_MAX_P * (PAIR_FULL_MAX_P - 1) // 2
            budget = min(budget, total)
            pairs_i, pairs_j = _select_pairs(p, budget, rng_seed)
            coverage = budget / total
            pair_flops = float(budget) * n
    flops = reps * (float(p) * n + pair_flops)
    if flops > flop_budget:
        raise InfeasibleError(
            f"estimated work {flops:.3g} flops exceeds the budget"
            f" {flop_budget:.3g}; shrink (p, n, reps) or raise the budget")

    row_chunk = max(1, min(p, (1 << 23) // max(n, 1)))
    parts = _parallel.map_blocks(
        _covmax_block, reps, rng_seed, workers=workers,
        block=_block_size_for(p, n),
        extra=(row_process, p, n, mu, mu2, mode, pairs_i, pairs_j, row_chunk))
    diag_raw = np.concatenate([a for a, _ in parts])
    off_raw = None if mode == "diag" else np.concatenate([b for _, b in parts])

    center_diag = n * mu2
    if key == LAW_FRECHET:
        diag = (diag_raw - center_diag) / c_np
        off = None if off_raw is None else off_raw / c_np
    else:
        diag = (diag_raw - center_diag - d_np) / c_np
        off = None if off_raw is None else (off_raw - d_np) / c_np
    meta.update({"seed": rng_seed, "mode": mode})
    return CovMaxResult(diag=diag, offdiag=off, p=p, n=n, law=key,
                        constants=constants, pair_coverage=coverage, meta=meta)
