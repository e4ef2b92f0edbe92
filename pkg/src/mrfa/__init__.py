"""Multi-resolution functional ANOVA emulators fitted by overlapping group lasso.

The main entry points are :func:`fit` (path, selection and variance
estimate in one call), :class:`FittedModel` for prediction and persistence,
and :func:`intervals` for pointwise confidence intervals.
"""

from ._backend import BACKEND
from .bench import FUNCTIONS, eval_function, generate_design, get_function, run_benchmark
from .config import RunConfig
from .errors import (
    CapacityError,
    ConvergenceError,
    DegeneratePointError,
    DimensionError,
    IllConditionedError,
    MRFAError,
    NumericError,
    ParameterRangeError,
    SchemaError,
    SchemaVersionError,
)
from .heredity import EffectResolution, is_heredity_closed
from .inference import apley_sigma2, interval_at, interval_score, intervals
from .kernels import Schedule, wendland_profile
from .model import (
    ExtrapolationWarning,
    FitResult,
    FittedModel,
    cross_validate,
    deterministic_selection,
    fit,
    information_criterion,
)
from .solver import SolverConfig, fit_at_lambda, solve_path

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FUNCTIONS", "CapacityError", "ConvergenceError", "DegeneratePointError",
    "DimensionError", "EffectResolution", "ExtrapolationWarning", "FitResult", "FittedModel",
    "IllConditionedError", "MRFAError", "NumericError", "ParameterRangeError", "RunConfig",
    "Schedule", "SchemaError", "SchemaVersionError", "SolverConfig", "apley_sigma2",
    "cross_validate", "deterministic_selection", "eval_function", "fit", "fit_at_lambda",
    "generate_design", "get_function", "information_criterion", "interval_at",
    "interval_score", "intervals", "is_heredity_closed", "run_benchmark", "solve_path",
    "wendland_profile",
]
