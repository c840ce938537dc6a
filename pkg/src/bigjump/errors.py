"""Exception types shared across the package.

The CLI maps these onto exit codes: ParameterError (and subclasses) -> 2,
InfeasibleError -> 3, NumericFailureError -> 4.
"""


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


class UnsupportedCaseError(ParameterError):
    """The requested combination is recognised but deliberately out of scope."""


class DegenerateDependenceError(ParameterError):
    """A dependence structure that breaks the estimator's assumptions."""


class NumericFailureError(ArithmeticError):
    """Quadrature, root finding, or finite differencing failed to converge."""


class InfeasibleError(RuntimeError):
    """The requested Monte Carlo experiment cannot resolve its target.

    Carries a suggestion for a budget that would.
    """

    def __init__(self, msg: str, required_reps: int | None = None):
        super().__init__(msg)
        self.required_reps = required_reps
