"""Fitted MRFA models: selection along the path, prediction and persistence."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from .config import RunConfig, parse_criterion
from .errors import (
    DimensionError,
    MRFAError,
    NumericError,
    ParameterRangeError,
    SchemaError,
    SchemaVersionError,
)
from .heredity import EffectResolution
from .kernels import AtomSet, Schedule, WendlandKernel, build_atoms
from .solver import solve_path

SCHEMA_VERSION = 1
_BOX_SLACK = 1e-9


class ExtrapolationWarning(UserWarning):
    """Raised (as a warning) when predicting outside the training box."""


@dataclass(frozen=True)
class Term:
    u: tuple
    r: int
    atom_index: int
    center: tuple
    bandwidth: float
    coef: float


@lru_cache(maxsize=4096)
def _candidate_atoms(g, schedule, k):
    return build_atoms(g, g.r, schedule, k, atom_cap=10 ** 12, d_max=len(g.u), r_max=g.r)


@dataclass(frozen=True)
class FittedModel:
    """Immutable MRFA emulator.

    ``candidates`` lists the candidate (u, r) pairs at the selected path point
    in column order; together with the schedule it reconstructs the full
    basis, which the interval code needs. ``terms`` holds the nonzero atoms.
    """

    d: int
    scale_min: tuple
    scale_max: tuple
    k: int
    schedule: Schedule
    intercept: float
    terms: tuple
    candidates: tuple
    lam: float
    rss: float
    n: int
    s: int
    sigma2: Optional[float] = None
    sigma2_kind: Optional[str] = None
    criterion: str = "det"
    perfect_fit: bool = False
    input_names: tuple = ()
    response_name: Optional[str] = None

    # -- scaling ----------------------------------------------------------
    def scale(self, X):
        """Map inputs to the unit box; returns ``(Xs, extrapolated_rows)``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DimensionError(f"expected {self.d} input columns, got shape {X.shape}")
        lo = np.asarray(self.scale_min)
        span = np.asarray(self.scale_max) - lo
        span = np.where(span > 0, span, 1.0)
        Xs = (X - lo) / span
        out = np.any((Xs < -_BOX_SLACK) | (Xs > 1 + _BOX_SLACK), axis=1)
        return Xs, out

    # -- basis ------------------------------------------------------------
    @cached_property
    def _term_blocks(self):
        groups = {}
        for t in self.terms:
            groups.setdefault((t.u, t.r, t.bandwidth), []).append(t)
        blocks = []
        for (u, r, bw), ts in groups.items():
            owner = EffectResolution(u, r)
            atoms = AtomSet(owner, np.array([t.center for t in ts]), bw,
                            WendlandKernel(self.k, len(u)))
            blocks.append((atoms, np.array([t.coef for t in ts])))
        return blocks

    def candidate_atoms(self):
        return [_candidate_atoms(g, self.schedule, self.k) for g in self.candidates]

    @property
    def p(self):
        return sum(len(a) for a in self.candidate_atoms())

    def candidate_design(self, Xs):
        """Dense design over every candidate column at scaled inputs."""
        Xs = np.asarray(Xs, dtype=np.float64)
        blocks = [a.evaluate(Xs) for a in self.candidate_atoms()]
        return np.hstack(blocks) if blocks else np.zeros((Xs.shape[0], 0))

    def coefficients(self):
        """Collapsed coefficients over the candidate columns."""
        offsets, pos = {}, 0
        for g, atoms in zip(self.candidates, self.candidate_atoms()):
            offsets[(g.u, g.r)] = pos
            pos += len(atoms)
        beta = np.zeros(pos)
        for t in self.terms:
            beta[offsets[(t.u, t.r)] + t.atom_index] = t.coef
        return beta

    @property
    def active_effects(self):
        return sorted({t.u for t in self.terms}, key=lambda u: (len(u), u))

    # -- prediction -------------------------------------------------------
    def predict_scaled(self, Xs):
        Xs = np.asarray(Xs, dtype=np.float64)
        out = np.full(Xs.shape[0], self.intercept)
        for atoms, coef in self._term_blocks:
            out += atoms.evaluate(Xs) @ coef
        return out

    def predict(self, X, return_extrapolation=False):
        """Predictions at inputs in original units.

        Rows outside the training box are evaluated as-is and trigger an
        :class:`ExtrapolationWarning`.
        """
        Xs, extra = self.scale(X)
        if np.any(extra):
            warnings.warn(f"{int(extra.sum())} prediction rows lie outside the training box",
                          ExtrapolationWarning, stacklevel=2)
        y = self.predict_scaled(Xs)
        return (y, extra) if return_extrapolation else y

    def with_sigma2(self, sigma2, kind):
        return replace(self, sigma2=float(sigma2), sigma2_kind=kind)

    # -- persistence ------------------------------------------------------
    def to_dict(self):
        out = {
            "schema_version": SCHEMA_VERSION,
            "d": self.d,
            "scaling": {"min": list(self.scale_min), "max": list(self.scale_max)},
            "kernel": {"k": self.k},
            "schedule": self.schedule.to_dict(),
            "intercept": self.intercept,
            "terms": [{"u": list(t.u), "r": t.r, "atom_index": t.atom_index,
                       "center": list(t.center), "bandwidth": t.bandwidth, "coef": t.coef}
                      for t in self.terms],
            "candidates": [[list(g.u), g.r] for g in self.candidates],
            "lambda": self.lam,
            "rss": self.rss,
            "n": self.n,
            "s": self.s,
            "criterion": self.criterion,
            "perfect_fit": self.perfect_fit,
            "input_names": list(self.input_names),
            "response_name": self.response_name,
        }
        if self.sigma2 is not None:
            out["sigma2"] = self.sigma2
            out["sigma2_kind"] = self.sigma2_kind
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise SchemaError("model file must hold a JSON object")
        version = data.get("schema_version")
        if not isinstance(version, int):
            raise SchemaError("missing or non-integer schema_version")
        if version > SCHEMA_VERSION or version < 1:
            raise SchemaVersionError(version, SCHEMA_VERSION)
        try:
            d = _int(data["d"])
            sched = data["schedule"]
            schedule = Schedule(_int(sched["g0"]), _int(sched["growth"]),
                                _float(sched["h0"]), _float(sched["decay"]))
            terms = tuple(
                Term(tuple(_int(j) for j in t["u"]), _int(t["r"]), _int(t["atom_index"]),
                     tuple(_float(c) for c in t["center"]), _float(t["bandwidth"]),
                     _float(t["coef"]))
                for t in data["terms"])
            candidates = tuple(EffectResolution(tuple(_int(j) for j in u), _int(r))
                               for u, r in data["candidates"])
            scale_min = tuple(_float(v) for v in data["scaling"]["min"])
            scale_max = tuple(_float(v) for v in data["scaling"]["max"])
            sigma2 = data.get("sigma2")
            model = cls(
                d=d, scale_min=scale_min, scale_max=scale_max, k=_int(data["kernel"]["k"]),
                schedule=schedule, intercept=_float(data["intercept"]), terms=terms,
                candidates=candidates, lam=_float(data["lambda"]), rss=_float(data["rss"]),
                n=_int(data["n"]), s=_int(data["s"]),
                sigma2=None if sigma2 is None else _float(sigma2),
                sigma2_kind=data.get("sigma2_kind"),
                criterion=str(data.get("criterion", "det")),
                perfect_fit=bool(data.get("perfect_fit", False)),
                input_names=tuple(str(v) for v in data.get("input_names", [])),
                response_name=data.get("response_name"))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid model file: {exc!r}") from exc
        if len(scale_min) != d or len(scale_max) != d:
            raise SchemaError("scaling record does not match d")
        known = {(g.u, g.r) for g in candidates}
        for t in terms:
            if (t.u, t.r) not in known or len(t.center) != len(t.u) or max(t.u) > d:
                raise SchemaError(f"term ({t.u}, {t.r}) is inconsistent with the candidates")
        return model

    def save(self, path):
        text = dumps(self.to_dict())
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise SchemaError(f"expected an integer, got {v!r}")
    return int(v)


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"expected a number, got {v!r}")
    return float(v)


def _encode(obj, indent, level):
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise NumericError("cannot serialize a non-finite number")
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        # lists of scalars stay on one line; lists of objects get one per line
        if indent is None or not any(isinstance(v, dict) for v in obj):
            return "[" + ", ".join(_encode(v, None, 0) for v in obj) + "]"
        pad = " " * (indent * (level + 1))
        inner = (",\n").join(pad + _encode(v, None, 0) for v in obj)
        return "[\n" + inner + "\n" + " " * (indent * level) + "]"
    if isinstance(obj, dict):
        if indent is None:
            return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v, None, 0)}"
                                   for k, v in obj.items()) + "}"
        pad = " " * (indent * (level + 1))
        inner = ",\n".join(f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                           for k, v in obj.items())
        return "{\n" + inner + "\n" + " " * (indent * level) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def save(model, path):
    model.save(path)


def load(path):
    return FittedModel.load(path)


# -- building models from a path ------------------------------------------------

def model_from_path(path, index, scale_min, scale_max, criterion="det", perfect_fit=False,
                    input_names=(), response_name=None):
    pt = path.points[index]
    layout = path.layout
    cfg = path.config
    candidates = tuple(layout.effects_upto(pt.n_columns))
    terms = []
    for g in candidates:
        atoms = layout.atoms[g]
        coef = pt.beta[layout.start[g]:layout.stop[g]]
        for j in np.flatnonzero(coef):
            terms.append(Term(g.u, g.r, int(j), tuple(float(c) for c in atoms.centers[j]),
                              atoms.bandwidth, float(coef[j])))
    return FittedModel(
        d=len(scale_min), scale_min=tuple(float(v) for v in scale_min),
        scale_max=tuple(float(v) for v in scale_max), k=cfg.k, schedule=cfg.schedule,
        intercept=float(pt.intercept), terms=tuple(terms), candidates=candidates,
        lam=float(pt.lam), rss=float(pt.rss), n=path.problem.n, s=int(pt.s),
        criterion=criterion, perfect_fit=perfect_fit, input_names=tuple(input_names),
        response_name=response_name)


# -- selection ---------------------------------------------------------------

@dataclass
class SelectionReport:
    criterion: str
    lambdas: np.ndarray
    rss: np.ndarray
    s: np.ndarray
    scores: np.ndarray
    chosen: int
    perfect_fit: bool = False
    details: dict = field(default_factory=dict)

    def rows(self):
        return [(float(l), float(r), int(s), float(c))
                for l, r, s, c in zip(self.lambdas, self.rss, self.s, self.scores)]


def _points(path):
    return path.points if hasattr(path, "points") else list(path)


def _argmin_prefer_large_lambda(scores, lambdas):
    order = np.lexsort((-np.asarray(lambdas), np.asarray(scores)))
    return int(order[0])


def information_criterion(path, kind, n=None):
    """AIC or BIC over the path; ties go to the larger lambda."""
    kind = kind.lower()
    if kind not in ("aic", "bic"):
        raise ParameterRangeError(f"kind must be 'aic' or 'bic', got {kind!r}")
    pts = _points(path)
    if not pts:
        raise MRFAError("empty path")
    if n is None:
        n = path.problem.n
    lam = np.array([pt.lam for pt in pts], dtype=float)
    rss = np.array([pt.rss for pt in pts], dtype=float)
    s = np.array([pt.s for pt in pts], dtype=float)
    perfect = rss <= 0.0
    with np.errstate(divide="ignore"):
        fit = n * np.log(rss / n)
    pen = 2.0 * s if kind == "aic" else s * math.log(n)
    scores = np.where(perfect, -np.inf, fit + pen)
    if np.any(perfect):
        cand = np.flatnonzero(perfect)
        chosen = int(cand[np.argmax(lam[cand])])
    else:
        chosen = _argmin_prefer_large_lambda(scores, lam)
    return SelectionReport(kind, lam, rss, s.astype(int), scores, chosen, bool(np.any(perfect)))


def deterministic_selection(path):
    """Smallest lambda reached without signs of numeric instability."""
    pts = _points(path)
    if not pts:
        raise MRFAError("empty path")
    stable = [i for i, pt in enumerate(pts) if pt.stable]
    chosen = stable[-1] if stable else len(pts) - 1
    lam = np.array([pt.lam for pt in pts])
    rss = np.array([pt.rss for pt in pts])
    s = np.array([pt.s for pt in pts])
    scores = np.where(np.arange(len(pts)) == chosen, 0.0, 1.0)
    return SelectionReport("det", lam, rss, s, scores, chosen, bool(rss[chosen] <= 0.0))


def fold_assignment(n, K, seed):
    """Fold label per row; a pure function of ``(n, K, seed)``."""
    if K < 2:
        raise ParameterRangeError("need at least 2 folds")
    if K > n:
        raise ParameterRangeError(f"{K} folds need at least {K} rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % K
    return folds


def _path_predictions(path, Xs):
    """Predictions at every path point for scaled inputs ``Xs``."""
    layout = path.layout
    blocks = [layout.atoms[g].evaluate(Xs) for g in layout.effects]
    phi = np.hstack(blocks) if blocks else np.zeros((Xs.shape[0], 0))
    return [pt.intercept + phi[:, :len(pt.beta)] @ pt.beta for pt in path.points]


def _fold_sse(Xs, y, folds, k, solver_cfg, grid):
    train = folds != k
    fold_path = solve_path(Xs[train], y[train], solver_cfg, lambdas=grid)
    preds = _path_predictions(fold_path, Xs[~train])
    sse = np.empty(len(grid))
    for i in range(len(grid)):
        pred = preds[min(i, len(preds) - 1)]
        r = y[~train] - pred
        sse[i] = float(r @ r)
    return sse


def replicate_folds(Xs, K, seed):
    """Fold labels that keep rows with identical inputs in the same fold.

    Distinct input rows (in order of first appearance) are dealt to folds by
    :func:`fold_assignment`; replicates follow their first occurrence.
    """
    Xs = np.asarray(Xs)
    _, first, inverse = np.unique(Xs, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    labels = fold_assignment(len(first), K, seed)
    return labels[rank[inverse]]


def cv_sse(Xs, y, solver_cfg, grid, K, seed, threads=1):
    """Held-out SSE per lambda summed over folds, using a shared grid."""
    folds = replicate_folds(Xs, K, seed)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda k: _fold_sse(Xs, y, folds, k, solver_cfg, grid),
                                  range(K)))
    else:
        parts = [_fold_sse(Xs, y, folds, k, solver_cfg, grid) for k in range(K)]
    total = np.zeros(len(grid))
    for part in parts:
        total += part
    return total


def cross_validate(path, Xs, y, K=10, seed=0, threads=1):
    """K-fold CV over the full-data path's lambda grid.

    ``Xs`` must be scaled the same way as the data behind ``path``. The
    chosen model is the full-data path point at the winning lambda.
    """
    pts = _points(path)
    grid = [pt.lam for pt in pts]
    y = np.asarray(y, dtype=float)
    sse = cv_sse(np.asarray(Xs, dtype=float), y, path.config, grid, K, seed, threads)
    scores = sse / len(y)
    lam = np.array(grid)
    chosen = _argmin_prefer_large_lambda(scores, lam)
    return SelectionReport(f"cv:{K}", lam, np.array([pt.rss for pt in pts]),
                           np.array([pt.s for pt in pts]), scores, chosen,
                           details={"folds": K, "seed": seed})


def sigma2_residual(rss, n, s):
    """``RSS / (n - s)``."""
    if n <= s:
        raise MRFAError(f"residual variance undefined: n={n} <= s={s}")
    return float(rss) / (n - s)


def sigma2_cv(path, Xs, y, K=10, seed=0, threads=1, report=None):
    """Minimum over lambda of the pooled held-out mean squared error."""
    if report is None:
        report = cross_validate(path, Xs, y, K, seed, threads)
    return float(np.min(report.scores))


# -- end-to-end fitting --------------------------------------------------------

@dataclass
class FitResult:
    model: FittedModel
    path: object
    report: SelectionReport
    Xs: np.ndarray
    y: np.ndarray
    config: RunConfig = None


def scaling_record(X, ranges=None):
    X = np.asarray(X, dtype=float)
    if ranges is not None:
        ranges = np.asarray(ranges, dtype=float)
        if ranges.shape != (X.shape[1], 2):
            raise DimensionError("ranges must have one (low, high) row per input")
        return ranges[:, 0].copy(), ranges[:, 1].copy()
    return X.min(axis=0), X.max(axis=0)


def fit(X, y, config=None, ranges=None, input_names=(), response_name=None):
    """Scale inputs, run the path and select a model per ``config.criterion``."""
    config = config or RunConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError("X must be 2-D with one row per response")
    if X.shape[0] < 2:
        raise DimensionError("need at least two observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("inputs contain NaN or Inf")
    lo, hi = scaling_record(X, ranges)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    Xs = (X - lo) / span
    if np.any(Xs < -1e-9) or np.any(Xs > 1 + 1e-9):
        warnings.warn("training inputs fall outside the declared ranges; clipping",
                      RuntimeWarning, stacklevel=2)
    Xs = np.clip(Xs, 0.0, 1.0)
    path = solve_path(Xs, y, config.solver_config())
    name, K = parse_criterion(config.criterion)
    threads = config.resolved_threads()
    if name in ("aic", "bic"):
        report = information_criterion(path, name)
    elif name == "cv":
        report = cross_validate(path, Xs, y, min(K, len(y)), config.seed, threads)
    else:
        report = deterministic_selection(path)
    model = model_from_path(path, report.chosen, lo, hi, config.criterion, report.perfect_fit,
                            input_names, response_name)
    n, s = model.n, model.s
    if name == "det":
        res = model.rss / (n - s) if n > s else 0.0
        model = model.with_sigma2(max(res, 1e-8 * float(np.var(y))), "floor")
    elif n > s:
        model = model.with_sigma2(sigma2_residual(model.rss, n, s), "residual")
    else:
        if name == "cv":
            value = float(np.min(report.scores))
        else:
            value = sigma2_cv(path, Xs, y, min(10, n), config.seed, threads)
        model = model.with_sigma2(value, "cv")
    return FitResult(model, path, report, Xs, y, config)
