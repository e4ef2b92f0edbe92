"""Closed-form test functions and the end-to-end benchmark harness."""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import RunConfig
from .errors import DimensionError, MRFAError, ParameterRangeError


@dataclass(frozen=True)
class TestFunction:
    name: str
    d: int
    ranges: tuple
    evaluator: Callable
    noise_sd: float = 0.0
    replicates: int = 1
    active: Optional[tuple] = None
    input_names: tuple = ()
    __test__ = False

    def __call__(self, X):
        return self.evaluator(np.asarray(X, dtype=float))


def _sparse10(X):
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return (np.sin(1.5 * x1 * np.pi) + 3.0 * np.cos(3.5 * x2 * np.pi) + 5.0 * np.exp(x3)
            + 2.0 * np.cos(x2 * np.pi) * np.sin(x3 * np.pi))


def _borehole(X):
    rw, r, tu, hu, tl, hl, L, kw = (X[:, j] for j in range(8))
    log_ratio = np.log(r / rw)
    denom = log_ratio * (1.0 + 2.0 * L * tu / (log_ratio * rw ** 2 * kw) + tu / tl)
    return 2.0 * np.pi * tu * (hu - hl) / denom


def _gramacy_lee(X):
    x1, x2, x3, x4 = X[:, 0], X[:, 1], X[:, 2], X[:, 3]
    return np.exp(np.sin((0.9 * (x1 + 0.48)) ** 10)) + x2 * x3 + x4


def _bending(X):
    L, b, h = X[:, 0], X[:, 1], X[:, 2]
    return 4e-9 * L ** 3 / (b * h ** 3)


def _otl(X):
    rb1, rb2, rf, rc1, rc2, beta = (X[:, j] for j in range(6))
    vb1 = 12.0 * rb2 / (rb1 + rb2)
    br = beta * (rc2 + 9.0)
    den = br + rf
    return (vb1 + 0.74) * br / den + 11.35 * rf / den + 0.74 * rf * br / (den * rc1)


def _wing(X):
    sw, wfw, a, lam_deg, q, taper, tc, nz, wdg, wp = (X[:, j] for j in range(10))
    lam = np.deg2rad(lam_deg)
    c = np.cos(lam)
    return (0.036 * sw ** 0.758 * wfw ** 0.0035 * (a / c ** 2) ** 0.6 * q ** 0.006
            * taper ** 0.04 * (100.0 * tc / c) ** -0.3 * (nz * wdg) ** 0.49 + sw * wp)


_BOREHOLE_RANGES = ((0.05, 0.15), (100.0, 50000.0), (63070.0, 115600.0), (990.0, 1110.0),
                    (63.1, 116.0), (700.0, 820.0), (1120.0, 1680.0), (9855.0, 12045.0))

FUNCTIONS = {
    "sparse10": TestFunction("sparse10", 10, ((0.0, 1.0),) * 10, _sparse10,
                             active=(1, 2, 3), input_names=tuple(f"x{j}" for j in range(1, 11))),
    "borehole": TestFunction("borehole", 8, _BOREHOLE_RANGES, _borehole,
                             active=tuple(range(1, 9)),
                             input_names=("rw", "r", "Tu", "Hu", "Tl", "Hl", "L", "Kw")),
    "gramacy_lee": TestFunction("gramacy_lee", 6, ((0.0, 1.0),) * 6, _gramacy_lee,
                                noise_sd=0.05, replicates=5, active=(1, 2, 3, 4),
                                input_names=tuple(f"x{j}" for j in range(1, 7))),
    "bending": TestFunction("bending", 3, ((10.0, 20.0), (1.0, 2.0), (0.1, 0.2)), _bending,
                            active=(1, 2, 3), input_names=("L", "b", "h")),
    "otl": TestFunction("otl", 6, ((50.0, 150.0), (25.0, 70.0), (0.5, 3.0), (1.2, 2.5),
                                   (0.25, 1.2), (50.0, 300.0)), _otl,
                        active=tuple(range(1, 7)),
                        input_names=("Rb1", "Rb2", "Rf", "Rc1", "Rc2", "beta")),
    "wing": TestFunction("wing", 10, ((150.0, 200.0), (220.0, 300.0), (6.0, 10.0),
                                      (-10.0, 10.0), (16.0, 45.0), (0.5, 1.0), (0.08, 0.18),
                                      (2.5, 6.0), (1700.0, 2500.0), (0.025, 0.08)), _wing,
                         active=tuple(range(1, 11)),
                         input_names=("Sw", "Wfw", "A", "Lambda", "q", "R", "tc", "Nz",
                                      "Wdg", "Wp")),
}


def get_function(name, d=None):
    """Look up a test function; ``borehole`` accepts ``d > 8`` (padded inputs)."""
    if name not in FUNCTIONS:
        raise ParameterRangeError(
            f"unknown function {name!r}; valid names: {', '.join(sorted(FUNCTIONS))}")
    fn = FUNCTIONS[name]
    if d is None or d == fn.d:
        return fn
    if name != "borehole" or d < fn.d:
        raise DimensionError(f"{name} takes {fn.d} inputs, not {d}")
    extra = d - fn.d
    return TestFunction(
        "borehole", d, fn.ranges + ((0.0, 1.0),) * extra,
        lambda X: _borehole(X[:, :8]), active=fn.active,
        input_names=fn.input_names + tuple(f"pad{j}" for j in range(1, extra + 1)))


def eval_function(name, x):
    """Noiseless value(s) of a test function at inputs in original units."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    fn = get_function(name, X.shape[1] if name == "borehole" and X.shape[1] > 8 else None)
    if X.shape[1] != fn.d:
        raise DimensionError(f"{name} takes {fn.d} inputs, got {X.shape[1]}")
    lo = np.array([r[0] for r in fn.ranges])
    hi = np.array([r[1] for r in fn.ranges])
    tol = 1e-12 * np.maximum(1.0, np.abs(hi))
    if np.any(X < lo - tol) or np.any(X > hi + tol):
        warnings.warn(f"{name}: inputs outside the declared ranges", RuntimeWarning, stacklevel=2)
    out = fn(X)
    return float(out[0]) if single else out


def generate_design(n, d, ranges=None, seed=0, replicates=1):
    """iid uniform design over ``ranges``; ``replicates`` copies each unique row.

    With replicates the result has ``n`` rows built from ``n // replicates``
    unique locations, each repeated consecutively.
    """
    if n < 0:
        raise ParameterRangeError("n must be nonnegative")
    if replicates < 1 or n % replicates:
        raise ParameterRangeError("n must be a multiple of the replicate count")
    ranges = ((0.0, 1.0),) * d if ranges is None else tuple(ranges)
    if len(ranges) != d:
        raise DimensionError("need one range per input")
    lo = np.array([r[0] for r in ranges], dtype=float)
    hi = np.array([r[1] for r in ranges], dtype=float)
    rng = np.random.default_rng(seed)
    U = rng.random((n // replicates, d))
    X = lo + U * (hi - lo)
    return np.repeat(X, replicates, axis=0) if replicates > 1 else X


def add_noise(y, sd, seed):
    """Mean-zero Gaussian noise; nothing is added unless ``sd > 0`` and a seed is given."""
    if sd <= 0 or seed is None:
        return np.asarray(y, dtype=float).copy()
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, sd, size=np.shape(y))


def coverage_metrics(lower, upper, truths, alpha):
    """``(coverage %, average width, average interval score)``."""
    from .inference import interval_score

    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if lower.size == 0:
        raise MRFAError("no intervals to score")
    if not lower.shape == upper.shape == truths.shape:
        raise DimensionError("lower, upper and truths must have equal lengths")
    inside = (lower <= truths) & (truths <= upper)
    scores = interval_score(lower, upper, truths, alpha)
    return 100.0 * float(inside.mean()), float(np.mean(upper - lower)), float(np.mean(scores))


@dataclass
class BenchResult:
    name: str
    n: int
    d: int
    seed: int
    criterion: str
    fit_seconds: float
    predict_seconds: Optional[float]
    rmse: Optional[float]
    selected_lambda: float
    selected_index: int
    path_length: int
    stop_reason: str
    s: int
    active_effects: str
    variable_detection: Optional[bool] = None
    coverage: Optional[float] = None
    avg_width: Optional[float] = None
    avg_score: Optional[float] = None
    extra: dict = field(default_factory=dict)

    TIMING_FIELDS = ("fit_seconds", "predict_seconds")

    def row(self):
        out = asdict(self)
        out.pop("extra")
        return out


def run_benchmark(name, n, n_test=10_000, seed=0, config=None, d=None, with_ci=False):
    """Design, fit, select, predict on a fresh test design and score."""
    from .model import fit

    config = config or RunConfig()
    fn = get_function(name, d)
    reps = fn.replicates
    if n % reps:
        raise ParameterRangeError(f"{name} uses {reps} replicates; n must be a multiple")
    X = generate_design(n, fn.d, fn.ranges, seed, reps)
    y = add_noise(fn(X), fn.noise_sd, seed + 1_000_003)
    t0 = time.perf_counter()
    result = fit(X, y, config, ranges=fn.ranges, input_names=fn.input_names)
    fit_seconds = time.perf_counter() - t0
    model = result.model
    active = model.active_effects
    detection = None
    if fn.active is not None and len(fn.active) < fn.d:
        detection = all(set(u) <= set(fn.active) for u in active)
    bench = BenchResult(
        name=name, n=n, d=fn.d, seed=seed, criterion=config.criterion,
        fit_seconds=fit_seconds, predict_seconds=None, rmse=None,
        selected_lambda=model.lam, selected_index=result.report.chosen,
        path_length=len(result.path), stop_reason=result.path.stop_reason, s=model.s,
        active_effects=" ".join("{" + ",".join(map(str, u)) + "}" for u in active),
        variable_detection=detection)
    if n_test > 0:
        Xt = generate_design(n_test, fn.d, fn.ranges, seed + 7_919)
        truth = fn(Xt)
        t0 = time.perf_counter()
        pred = model.predict(Xt)
        bench.predict_seconds = time.perf_counter() - t0
        bench.rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
        if with_ci:
            from .inference import intervals

            ci = intervals(result, model.scale(Xt)[0], alpha=config.alpha,
                           variant=config.ci_variant,
                           seed=config.seed)
            bench.coverage, bench.avg_width, bench.avg_score = coverage_metrics(
                ci.lower, ci.upper, truth, config.alpha)
    bench.extra["result"] = result
    return bench


def write_results(results, path_or_file):
    """One BenchResult per CSV row."""
    rows = [r.row() for r in results]
    if not rows:
        return
    own = isinstance(path_or_file, str)
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    finally:
        if own:
            fh.close()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".10g") if math.isfinite(v) else str(v)
    return v


def format_table(results):
    """Human-readable summary table."""
    head = f"{'function':<12}{'n':>8}{'d':>4}{'seed':>6}{'crit':>7}{'fit s':>9}{'RMSE':>12}{'s':>6}"
    lines = [head, "-" * len(head)]
    for r in results:
        rmse = "-" if r.rmse is None else f"{r.rmse:.4g}"
        lines.append(f"{r.name:<12}{r.n:>8}{r.d:>4}{r.seed:>6}{r.criterion:>7}"
                     f"{r.fit_seconds:>9.2f}{rmse:>12}{r.s:>6}")
    return "\n".join(lines)
