"""bigjump: heavy-tailed sums at desk scale.

Tools for studying when the tail of a dependent sum is driven by its single
largest term: marginal tail models, stationary process constructions with
known marginals, checkable sufficient conditions, importance-style Monte
Carlo for the ratio P(sum > x) / (n * P(X > x)), linear-process tail
arithmetic, and maxima of sample covariance entries.
"""

__version__ = "0.1.0"

from . import cli, conditions, config, covmax, dist, ldmc, linproc, procsim
from .errors import (
    DegenerateDependenceError,
    InfeasibleError,
    NumericFailureError,
    ParameterError,
    UnsupportedCaseError,
)

__all__ = [
    "cli", "conditions", "config", "covmax", "dist", "ldmc", "linproc",
    "procsim",
    "ParameterError", "UnsupportedCaseError", "DegenerateDependenceError",
    "NumericFailureError", "InfeasibleError",
    "__version__",
]
