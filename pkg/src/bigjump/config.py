"""Declarative experiment configuration.

A config is one JSON-compatible mapping: subcommand, seed, workers, output
options, and a `spec` payload interpreted by the subcommand. Models,
processes, boundaries, and grids are described by small records so the whole
experiment round-trips through the report file and can be re-run from it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import conditions, dist, procsim
from .errors import ParameterError

SUBCOMMANDS = ("simulate", "check-conditions", "estimate-ld", "linear-ld",
               "covmax", "bounds")
FORMATS = ("csv", "json", "both")

MODEL_FAMILIES = ("pareto", "lognormal", "logweibull", "weibull_type")
PROCESS_KINDS = ("iid", "gaussian_transform", "min_construction", "stoch_vol",
                 "linear", "sv_regvar", "comonotone", "clipped_iid")


# ---------------------------------------------------------------------------
# component builders; each raises ParameterError with a specific message


def build_model(record) -> dist.TailModel:
    """{family, params{...}, two_sided?, p_plus?} -> TailModel."""
    if not isinstance(record, dict):
        raise ParameterError("model record must be a mapping")
    family = record.get("family")
    if family not in MODEL_FAMILIES:
        raise ParameterError(
            f"unknown model family {family!r}, expected one of {MODEL_FAMILIES}")
    params = record.get("params", {})
    if not isinstance(params, dict):
        raise ParameterError("model params must be a mapping")
    if family == "pareto":
        base = dist.make_pareto(params.get("alpha", 0.0), params.get("x_m", 1.0))
    elif family == "lognormal":
        base = dist.make_lognormal(params.get("mu", 0.0), params.get("sigma", 1.0))
    elif family == "logweibull":
        base = dist.make_logweibull(params.get("alpha", 0.0), params.get("scale", 1.0))
    else:
        base = dist.make_weibull_type(params.get("alpha", 0.0))
    if record.get("two_sided"):
        p_plus = float(record.get("p_plus", 0.5))
        return dist.make_two_sided(base, p_plus, 1.0 - p_plus)
    return base


def build_process(record) -> procsim.ProcessModel:
    """{kind, ...kind-specific fields} -> ProcessModel."""
    if not isinstance(record, dict):
        raise ParameterError("process record must be a mapping")
    kind = record.get("kind")
    if kind not in PROCESS_KINDS:
        raise ParameterError(
            f"unknown process kind {kind!r}, expected one of {PROCESS_KINDS}")
    if kind == "iid":
        return procsim.make_iid(build_model(_need(record, "marginal")))
    if kind == "gaussian_transform":
        return procsim.make_gaussian_transform(
            _need(record, "theta"), float(record.get("alpha", 1.0)))
    if kind == "min_construction":
        noise = record.get("noise")
        return procsim.make_min_construction(
            _need(record, "a"), build_model(noise) if noise else None)
    if kind == "stoch_vol":
        return procsim.make_stoch_vol(
            _need(record, "scales"), _need(record, "weights"),
            build_model(_need(record, "noise")),
            int(record.get("sigma_m", 0)))
    if kind == "linear":
        return procsim.make_linear(
            _need(record, "psi"), build_model(_need(record, "noise")),
            float(record.get("truncation_tol", 0.0)))
    if kind == "sv_regvar":
        return procsim.make_sv_regvar(
            float(record.get("mu", 0.0)), float(_need(record, "s")),
            build_model(_need(record, "noise")))
    if kind == "comonotone":
        return procsim.make_comonotone(
            build_model(_need(record, "marginal")), int(record.get("m", 1)))
    return procsim.make_clipped_iid(
        build_model(_need(record, "base")), float(_need(record, "c")))


def build_boundary(record) -> conditions.SeparatingBoundary:
    """{regime, params?} -> separating boundary from the catalogue."""
    if not isinstance(record, dict):
        raise ParameterError("boundary record must be a mapping")
    regime = record.get("regime")
    if not isinstance(regime, str):
        raise ParameterError("boundary record needs a 'regime' string")
    return conditions.boundary_catalogue(regime, record.get("params"))


def build_grid(record) -> np.ndarray:
    """Either an explicit increasing list or {lo, hi, points, spacing?}."""
    if isinstance(record, (list, tuple)):
        xs = np.asarray(record, dtype=float)
        if xs.size < 1 or np.any(np.diff(xs) <= 0):
            raise ParameterError("explicit grid must be strictly increasing")
        return xs
    if not isinstance(record, dict):
        raise ParameterError("grid must be a list or a {lo, hi, points} mapping")
    lo, hi = float(_need(record, "lo")), float(_need(record, "hi"))
    points = int(record.get("points", 16))
    spacing = record.get("spacing", "geometric")
    if points < 1 or hi <= lo:
        raise ParameterError("grid needs hi > lo and points >= 1")
    if spacing == "geometric":
        if lo <= 0:
            raise ParameterError("geometric grid needs lo > 0")
        return np.geomspace(lo, hi, points)
    if spacing == "linear":
        return np.linspace(lo, hi, points)
    raise ParameterError(f"unknown grid spacing {spacing!r}")


def _need(record: dict, key: str):
    if key not in record:
        raise ParameterError(f"missing required field '{key}'")
    return record[key]


# ---------------------------------------------------------------------------
# the experiment config


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    seed: int
    workers: int = 1
    out_dir: str = "."
    fmt: str = "both"
    spec: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "workers": self.workers,
            "out_dir": self.out_dir,
            "format": self.fmt,
            "spec": copy.deepcopy(self.spec),
        }


# required spec fields per subcommand, checked up front so every omission is
# reported in one pass; deeper domain checks live in the builders
_REQUIRED_SPEC = {
    "simulate": ("process", "n"),
    "check-conditions": ("condition",),
    "estimate-ld": ("n", "reps", "boundary"),
    "linear-ld": ("process", "reps"),
    "covmax": ("rows", "n", "reps", "law"),
    "bounds": ("model", "n", "c", "grid"),
}

_CONDITIONS = ("c1", "c2", "bojanic_seneta", "lemma21", "rv1", "rv2",
               "c3", "rv3", "iid_ld")

# what each condition check consumes on top of spec.condition
_COND_REQUIRED = {
    "c1": ("model", "x_grid"),
    "c2": ("model", "boundary", "n_grid"),
    "bojanic_seneta": ("model", "x_grid"),
    "lemma21": ("model", "boundary", "n_grid"),
    "rv1": ("model", "x_grid"),
    "rv2": ("model", "x_grid"),
    "c3": ("process", "x_grid", "reps"),
    "rv3": ("process", "x_grid", "reps"),
    "iid_ld": ("model", "boundary", "n", "reps"),
}

_ESTIMATORS = ("naive", "reduced_iid")

# which component records each subcommand may carry, for eager validation
_COMPONENT_FIELDS = {
    "model": build_model, "marginal": build_model, "noise": build_model,
    "process": build_process, "rows": build_process,
    "boundary": build_boundary,
    "grid": build_grid, "x_grid": build_grid,
}


def validate(raw) -> list[str]:
    """Every problem in the mapping, not just the first."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        return ["config must be a mapping"]
    sub = raw.get("subcommand")
    if sub not in SUBCOMMANDS:
        problems.append(
            f"subcommand: got {sub!r}, expected one of {SUBCOMMANDS}")
    seed = raw.get("seed")
    if seed is None:
        problems.append("seed: required (batch runs take no entropy default)")
    elif not isinstance(seed, int) or isinstance(seed, bool) or not (
            -2**63 <= seed < 2**64):
        problems.append(f"seed: must be a 64-bit integer, got {seed!r}")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        problems.append(f"workers: must be a positive integer, got {workers!r}")
    fmt = raw.get("format", "both")
    if fmt not in FORMATS:
        problems.append(f"format: got {fmt!r}, expected one of {FORMATS}")
    out_dir = raw.get("out_dir", ".")
    if not isinstance(out_dir, str):
        problems.append(f"out_dir: must be a string, got {out_dir!r}")
    spec = raw.get("spec", {})
    if not isinstance(spec, dict):
        problems.append("spec: must be a mapping")
        spec = {}
    if sub in _REQUIRED_SPEC:
        for key in _REQUIRED_SPEC[sub]:
            if key not in spec:
                problems.append(f"spec.{key}: required for {sub}")
        if sub == "check-conditions":
            cond = str(spec.get("condition", "")).lower()
            if "condition" in spec and cond not in _CONDITIONS:
                problems.append(
                    f"spec.condition: got {spec['condition']!r},"
                    f" expected one of {_CONDITIONS}")
            for key in _COND_REQUIRED.get(cond, ()):
                if key not in spec:
                    problems.append(f"spec.{key}: required for condition {cond}")
        elif sub == "estimate-ld":
            estimator = spec.get("estimator", "reduced_iid")
            if estimator not in _ESTIMATORS:
                problems.append(
                    f"spec.estimator: got {estimator!r},"
                    f" expected one of {_ESTIMATORS}")
            elif estimator == "reduced_iid" and "model" not in spec:
                problems.append("spec.model: required for reduced_iid")
            elif estimator == "naive" and not ({"model", "process"} & spec.keys()):
                problems.append("spec.model or spec.process: required for naive")
        elif sub == "covmax" and not ({"p", "dimension_rule"} & spec.keys()):
            problems.append("spec.p or spec.dimension_rule: required for covmax")
    for key, builder in _COMPONENT_FIELDS.items():
        if key in spec:
            try:
                builder(spec[key])
            except ParameterError as e:
                problems.append(f"spec.{key}: {e}")
    for key in ("reps", "n", "points", "paths", "p"):
        if key in spec and (not isinstance(spec[key], (int, float))
                            or isinstance(spec[key], bool) or spec[key] < 1):
            problems.append(f"spec.{key}: must be a positive number")
    return problems


def from_dict(raw: dict) -> ExperimentConfig:
    """Parse after validation; raises ParameterError listing every problem."""
    problems = validate(raw)
    if problems:
        raise ParameterError("; ".join(problems))
    return ExperimentConfig(
        subcommand=raw["subcommand"], seed=raw["seed"],
        workers=raw.get("workers", 1), out_dir=raw.get("out_dir", "."),
        fmt=raw.get("format", "both"), spec=copy.deepcopy(raw.get("spec", {})))
