"""Batch experiment driver.

One experiment = one config (file plus flag overrides) = one output
directory. Results land as a plot-ready CSV table, a byte-stable results
JSON, and a report JSON that echoes the full config so the run can be
repeated from the report alone. Exit codes: 0 ok, 2 invalid parameters,
3 infeasible experiment, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__, _parallel, conditions, covmax, ldmc, linproc, procsim
from .config import (
    SUBCOMMANDS, ExperimentConfig, build_boundary, build_grid, build_model,
    build_process, from_dict, validate,
)
from .errors import InfeasibleError, NumericFailureError, ParameterError

SIMULATE_CELL_CAP = 10_000_000


@dataclasses.dataclass
class ExperimentReport:
    config: dict
    version: str
    wall_time_s: float
    results: dict
    provenance: dict

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# serialization helpers


def artifact_version() -> str:
    base = f"bigjump-{__version__}"
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{base}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return base


def _jsonable(v):
    """Results payloads may carry numpy arrays and report objects."""
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)                       # JSON has no inf/nan
    if v is None or isinstance(v, (bool, int, float, str)):
        return v
    if hasattr(v, "as_dict"):
        return _jsonable(v.as_dict())
    return repr(v)


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _csv_text(rows) -> str:
    return "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# subcommand runners: config -> (results, csv_rows, provenance)


def _run_simulate(cfg: ExperimentConfig):
    spec = cfg.spec
    process = build_process(spec["process"])
    n, paths = int(spec["n"]), int(spec.get("paths", 100))
    if n * paths > SIMULATE_CELL_CAP:
        raise InfeasibleError(
            f"path dump of {n * paths} cells exceeds the {SIMULATE_CELL_CAP}"
            " cap; lower n or paths")
    x = process.sample_paths(n, paths, _parallel.block_rng(cfg.seed, 0))
    rows = [["rep", "t", "x"]]
    for r in range(paths):
        for t in range(n):
            rows.append([str(r), str(t), repr(float(x[r, t]))])
    results = {"n": n, "paths": paths, "kind": process.kind, "m": process.m,
               "x_mean": float(x.mean()), "x_max": float(x.max())}
    prov = {"estimator": "path_dump", "reps": paths, "ci_method": None,
            "seed": cfg.seed}
    return results, rows, prov


def _condition_report_rows(report) -> list:
    rows = [["x", "statistic", "ci_lo", "ci_hi"]]
    d = report.as_dict()
    lo = d["ci_lo"] or [""] * len(d["grid"])
    hi = d["ci_hi"] or [""] * len(d["grid"])
    for i, x in enumerate(d["grid"]):
        rows.append([repr(float(x)), repr(float(d["statistic"][i])),
                     lo[i] if lo[i] == "" else repr(float(lo[i])),
                     hi[i] if hi[i] == "" else repr(float(hi[i]))])
    return rows


def _run_check_conditions(cfg: ExperimentConfig):
    spec = cfg.spec
    cond = str(spec["condition"]).lower()
    reps = int(spec.get("reps", 100000))
    mc = cond in ("c3", "rv3", "iid_ld")

    if cond in ("c3", "rv3"):
        process = build_process(spec["process"])
        xs = build_grid(spec["x_grid"])
        if cond == "c3":
            g = conditions.default_g(process.marginal)
            report = conditions.estimate_C3(process, g, float(spec.get("eps", 1.0)),
                                            xs, reps, cfg.seed, cfg.workers)
        else:
            report = conditions.tail_dependence_lag(process, xs, reps,
                                                    cfg.seed, cfg.workers)
    else:
        model = build_model(spec["model"])
        if cond == "c1":
            report = conditions.check_C1(conditions.default_g(model), model,
                                         build_grid(spec["x_grid"]),
                                         float(spec.get("C", 1.0)))
        elif cond == "c2":
            report = conditions.check_C2_ratio(
                conditions.default_g(model), model,
                build_boundary(spec["boundary"]), spec["n_grid"],
                delta=float(spec.get("delta", 1.0)),
                x_points=int(spec.get("x_points", 64)))
        elif cond == "bojanic_seneta":
            report = conditions.bojanic_seneta(model.hazard_integral,
                                               build_grid(spec["x_grid"]))
        elif cond == "lemma21":
            report = conditions.lemma21_check(
                model, conditions.default_g(model),
                build_boundary(spec["boundary"]), spec["n_grid"],
                eps=float(spec.get("eps", 1.0)),
                x_points=int(spec.get("x_points", 64)),
                x_span=float(spec.get("x_span", 1e6)))
        elif cond == "rv1":
            report = conditions.check_RV1(model, build_grid(spec["x_grid"]))
        elif cond == "rv2":
            report = conditions.check_RV2(model, build_grid(spec["x_grid"]))
        else:
            report = conditions.check_iid_LD(
                model, int(spec["n"]), build_boundary(spec["boundary"]),
                delta=float(spec.get("delta", 1.0)), reps=reps,
                rng_seed=cfg.seed, workers=cfg.workers,
                points=int(spec.get("points", 16)))

    results = report.as_dict()
    if getattr(report, "companion", None) is not None:
        results["companion"] = report.companion.as_dict()
    prov = {"estimator": report.condition_id, "reps": reps if mc else None,
            "ci_method": "wilson99" if mc else None, "seed": cfg.seed}
    return results, _condition_report_rows(report), prov


def _run_estimate_ld(cfg: ExperimentConfig):
    spec = cfg.spec
    estimator = spec.get("estimator", "reduced_iid")
    n, reps = int(spec["n"]), int(spec["reps"])
    delta = float(spec.get("delta", 1.0))
    points = int(spec.get("points", ldmc.GRID_POINTS))
    boundary = build_boundary(spec["boundary"])
    if estimator == "reduced_iid":
        if "model" not in spec:
            raise ParameterError("reduced_iid estimates iid sums: spec.model required")
        model = build_model(spec["model"])
        grid = ldmc.default_grid(model, n, boundary, delta, reps, points)
        curve = ldmc.estimate_reduced_iid(model, n, grid, reps, cfg.seed,
                                          cfg.workers)
        ci = "normal99"
    elif estimator == "naive":
        if "process" in spec:
            process = build_process(spec["process"])
        elif "model" in spec:
            process = procsim.make_iid(build_model(spec["model"]))
        else:
            raise ParameterError("naive estimator needs spec.process or spec.model")
        if process.marginal is None:
            raise ParameterError("process exposes no marginal tail for the target")
        grid = ldmc.default_grid(process.marginal, n, boundary, delta, reps,
                                 points)
        curve = ldmc.estimate_naive(process, n, grid, reps, cfg.seed,
                                    cfg.workers)
        ci = "wilson99"
    else:
        raise ParameterError(
            f"unknown estimator {estimator!r}, expected naive or reduced_iid")
    sup = ldmc.uniform_sup_report(curve)
    results = {"curve": curve.as_dict(),
               "sup": {"value": sup.sup, "x": sup.x, "index": sup.index,
                       "ci_halfwidth": sup.ci_halfwidth}}
    prov = {"estimator": curve.estimator, "reps": reps, "ci_method": ci,
            "seed": cfg.seed}
    return results, curve.csv_rows(), prov


def _run_linear_ld(cfg: ExperimentConfig):
    spec = cfg.spec
    process = build_process(spec["process"])
    if not str(getattr(process, "kind", "")).startswith("linear"):
        raise ParameterError("linear-ld needs a linear process spec")
    reps = int(spec["reps"])
    op = spec.get("op", "lemma41")
    if op == "lemma41":
        curve = linproc.lemma41_ratio(process, build_grid(spec["x_grid"]),
                                      reps, cfg.seed, cfg.workers)
        results = {"curve": curve.as_dict()}
    elif op == "prop42":
        wspec = spec.get("window", {})
        coef = linproc.coef_stats(process.psi)
        window = linproc.lambda_window(
            wspec.get("variant", "ex44"), float(wspec["alpha"]),
            int(spec["n"]), delta=float(wspec.get("delta", 0.1)),
            m0=abs(coef.m0), m0_prime=coef.m0_prime,
            boundary_c=float(wspec.get("boundary_c", 1.0)))
        curve = linproc.prop42_ratio(process, int(spec["n"]), window, reps,
                                     cfg.seed, cfg.workers,
                                     points=int(spec.get("points", 12)))
        results = {"curve": curve.as_dict(), "window": window.as_dict()}
    else:
        raise ParameterError(f"unknown op {op!r}, expected lemma41 or prop42")
    prov = {"estimator": f"linear_{op}", "reps": reps, "ci_method": "wilson99",
            "seed": cfg.seed}
    return results, curve.csv_rows(), prov


def _run_covmax(cfg: ExperimentConfig):
    spec = cfg.spec
    rows_proc = build_process(spec["rows"])
    n, reps = int(spec["n"]), int(spec["reps"])
    law = str(spec["law"])
    if "p" in spec:
        p = int(spec["p"])
    elif "dimension_rule" in spec:
        rule = spec["dimension_rule"]
        p = covmax.dimension_rule(rule.get("regime", law), n,
                                  rule.get("params"))
    else:
        raise ParameterError("covmax needs spec.p or spec.dimension_rule")
    res = covmax.simulate_covmax(
        rows_proc, p, n, reps, law, rng_seed=cfg.seed, workers=cfg.workers,
        include_offdiag=bool(spec.get("include_offdiag", True)),
        pair_budget=spec.get("pair_budget"))
    prov = {"estimator": "covmax_stream", "reps": reps, "ci_method": None,
            "seed": cfg.seed}
    return res.as_dict(), res.csv_rows(), prov


def _run_bounds(cfg: ExperimentConfig):
    spec = cfg.spec
    model = build_model(spec["model"])
    n, c = int(spec["n"]), float(spec["c"])
    xs = build_grid(spec["grid"])
    reps = int(spec.get("reps", 100000))
    fn_p = float(spec.get("p", 3))
    process = procsim.make_clipped_iid(model, c)
    counts = ldmc._sum_exceed_counts(process, n, xs, reps, cfg.seed,
                                     cfg.workers)
    p_hat = counts / reps
    se = np.sqrt(p_hat * (1.0 - p_hat) / reps)
    sigma2_n = n * model.variance
    if not math.isfinite(sigma2_n):
        raise ParameterError("bounds need a finite-variance model")
    m_pn = n * model.base.moment(int(fn_p))
    if not math.isfinite(m_pn):
        raise ParameterError(f"bounds need a finite absolute moment of order {fn_p}")
    prokh = np.array([ldmc.prokhorov_bound(float(x), c, sigma2_n) for x in xs])
    fukn = np.array([ldmc.fuk_nagaev_bound(float(x), fn_p, m_pn,
                                           math.sqrt(sigma2_n)) for x in xs])
    floor = p_hat + 3.0 * se
    rows = [["x", "p_hat", "se", "prokhorov", "fuk_nagaev"]]
    for i, x in enumerate(xs):
        rows.append([repr(float(x)), repr(float(p_hat[i])), repr(float(se[i])),
                     repr(float(prokh[i])), repr(float(fukn[i]))])
    results = {"x": xs, "p_hat": p_hat, "se": se, "prokhorov": prokh,
               "fuk_nagaev": fukn, "sigma2_n": sigma2_n, "m_pn": m_pn,
               "c": c, "p": fn_p,
               "prokhorov_dominates": bool(np.all(prokh >= floor)),
               "fuk_nagaev_dominates": bool(np.all(fukn >= floor))}
    prov = {"estimator": "clipped_naive_counts", "reps": reps,
            "ci_method": "binomial_se", "seed": cfg.seed}
    return results, rows, prov


_RUNNERS = {
    "simulate": _run_simulate,
    "check-conditions": _run_check_conditions,
    "estimate-ld": _run_estimate_ld,
    "linear-ld": _run_linear_ld,
    "covmax": _run_covmax,
    "bounds": _run_bounds,
}


# ---------------------------------------------------------------------------
# run + output plumbing


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Dispatch, then write results.csv / results.json / report.json
    atomically under cfg.out_dir (format selects which tables appear)."""
    t0 = time.perf_counter()
    results, rows, prov = _RUNNERS[cfg.subcommand](cfg)
    report = ExperimentReport(
        config=cfg.as_dict(), version=artifact_version(),
        wall_time_s=time.perf_counter() - t0, results=_jsonable(results),
        provenance=_jsonable(prov))
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.fmt in ("csv", "both"):
        _atomic_write(os.path.join(cfg.out_dir, "results.csv"),
                      _csv_text(rows))
    if cfg.fmt in ("json", "both"):
        # byte-stable results artifact: no timing, no execution details
        # (workers / out_dir / format), so bytes match across worker counts
        _atomic_write(os.path.join(cfg.out_dir, "results.json"),
                      _dumps({"experiment": {"subcommand": cfg.subcommand,
                                             "seed": cfg.seed,
                                             "spec": _jsonable(cfg.spec)},
                              "version": report.version,
                              "results": report.results,
                              "provenance": report.provenance,
                              "table": rows}))
    _atomic_write(os.path.join(cfg.out_dir, "report.json"),
                  _dumps(report.as_dict()))
    return report


def _emit_error(obj: dict):
    print(json.dumps(_jsonable(obj), sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bigjump",
        description="Heavy-tailed sum experiments: path dumps, condition"
                    " checks, large-deviation ratio estimates, linear-process"
                    " windows, covariance maxima, and sum-tail bounds.")
    parser.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                        help="experiment type (may also come from --config)")
    parser.add_argument("--config", help="JSON config file (a report.json"
                                         " from a previous run also works)")
    parser.add_argument("--seed", type=int, help="RNG seed (required here or"
                                                 " in the config)")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--out-dir", help="output directory (default .)")
    parser.add_argument("--format", choices=["csv", "json", "both"],
                        help="which result tables to write (default both)")
    args = parser.parse_args(argv)

    raw: dict = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            _emit_error({"error": "validation",
                         "problems": [f"--config {args.config}: {e}"]})
            return 2
        if not isinstance(raw, dict):
            _emit_error({"error": "validation",
                         "problems": ["config must be a JSON object"]})
            return 2
        if "subcommand" not in raw and isinstance(raw.get("config"), dict):
            raw = raw["config"]          # re-run straight from a report file
    for key, val in (("subcommand", args.subcommand), ("seed", args.seed),
                     ("workers", args.workers), ("out_dir", args.out_dir),
                     ("format", args.format)):
        if val is not None:
            raw[key] = val               # flags win over the file

    problems = validate(raw)
    if problems:
        _emit_error({"error": "validation", "problems": problems})
        return 2
    cfg = from_dict(raw)
    try:
        report = run(cfg)
    except InfeasibleError as e:
        _emit_error({"error": "infeasible", "message": str(e),
                     "required_reps": e.required_reps,
                     "subcommand": cfg.subcommand, "spec": cfg.spec})
        return 3
    except ParameterError as e:
        _emit_error({"error": "parameter", "message": str(e),
                     "subcommand": cfg.subcommand, "spec": cfg.spec})
        return 2
    except NumericFailureError as e:
        _emit_error({"error": "numeric", "message": str(e),
                     "subcommand": cfg.subcommand, "spec": cfg.spec})
        return 4
    brief = {k: report.results[k] for k in ("verdict", "ks_diag", "sup")
             if isinstance(report.results, dict) and k in report.results}
    print(f"{cfg.subcommand}: ok (seed={cfg.seed}, {report.wall_time_s:.2f}s)"
          f" -> {os.path.abspath(cfg.out_dir)}"
          + (f" {json.dumps(_jsonable(brief), sort_keys=True)}" if brief else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
