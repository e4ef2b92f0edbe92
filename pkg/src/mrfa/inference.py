"""Pointwise confidence intervals from the decorrelated score statistic.

For a prediction point with basis vector ``phi*`` the coefficient vector is
reparametrized so that ``y* = phi*' theta`` becomes one coordinate. The
remaining coordinates are nuisance parameters, projected out with a weight
vector ``w`` estimated by ridge or lasso regression. Inverting the score test
of ``H0: y* = delta`` gives the interval.

The model-level code works with the augmented feature ``(1, phi)`` so the
intercept is part of ``theta``; its pivot is the constant column, which makes
``Z = 1`` and ``Q_i = phi_i - phi*`` and lets many points share one
eigendecomposition of the centered scatter matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import norm

from . import _backend
from .errors import (
    ConvergenceError,
    DegeneratePointError,
    DimensionError,
    IllConditionedError,
    MRFAError,
    ParameterRangeError,
)

RIDGE_SCALE = 1e-6
LASSO_GRID = 20
LASSO_FOLDS = 5
APLEY_GRID = 25


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    level: float
    sigma2: float
    variant: str
    center: float
    b: float


def interval_score(lower, upper, x, alpha):
    """Width plus ``2/alpha`` times the distance by which ``x`` misses."""
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError("alpha must lie in (0, 1)")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.asarray(x, dtype=float)
    out = ((upper - lower) + (2.0 / alpha) * (lower - x) * (x < lower)
           + (2.0 / alpha) * (x - upper) * (x > upper))
    return float(out) if out.ndim == 0 else out


# -- generic single-point machinery -------------------------------------------

@dataclass
class ScoreContext:
    """Transformed data for one prediction point.

    ``Z`` and ``Q`` are the coordinates of each training feature in the basis
    ``A = (phi*, unit vectors without the pivot)``; ``eta`` holds the fitted
    nuisance coordinates, which equal the fitted coefficients minus the pivot.
    """

    phi_star: np.ndarray
    pivot: int
    Z: np.ndarray
    Q: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    sigma2: Optional[float] = None
    w: Optional[np.ndarray] = None
    w_method: Optional[str] = None
    details: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.y.shape[0]

    def reconstruct(self):
        """``A (Z_i, Q_i)`` for every row; equals the original features."""
        rest = np.delete(self.phi_star, self.pivot)
        out = np.empty((self.n, self.phi_star.shape[0]))
        out[:, self.pivot] = self.Z * self.phi_star[self.pivot]
        out[:, np.arange(out.shape[1]) != self.pivot] = self.Q + self.Z[:, None] * rest
        return out

    @property
    def b(self):
        if self.w is None or self.sigma2 is None:
            raise MRFAError("context needs w and sigma2 first")
        a = self.Z - self.Q @ self.w
        return float(self.Z @ a) / (self.n * self.sigma2)

    def score(self, delta=0.0):
        """Decorrelated score at ``y* = delta``."""
        if self.w is None or self.sigma2 is None:
            raise MRFAError("context needs w and sigma2 first")
        a = self.Z - self.Q @ self.w
        r = self.y - delta * self.Z - self.Q @ self.eta
        return -float(r @ a) / (self.n * self.sigma2)


def build_context(Phi, y, theta, phi_star, sigma2=None):
    """Reparametrize around ``phi_star`` using the partitioned inverse of ``A``.

    The pivot is the coordinate with the largest ``|phi*_j|`` (lowest index on
    ties), so ``A`` is always invertible when ``phi*`` is nonzero.
    """
    Phi = np.asarray(Phi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    phi_star = np.asarray(phi_star, dtype=float).ravel()
    if Phi.ndim != 2 or Phi.shape[0] != y.shape[0]:
        raise DimensionError("Phi must be n x p with one row per response")
    if Phi.shape[1] != phi_star.shape[0] or theta.shape[0] != phi_star.shape[0]:
        raise DimensionError("phi_star and theta must have one entry per column of Phi")
    pivot = int(np.argmax(np.abs(phi_star)))
    if phi_star[pivot] == 0.0:
        raise DegeneratePointError(
            "basis vector is zero at this point; only an intercept-only interval is possible")
    Z = Phi[:, pivot] / phi_star[pivot]
    keep = np.arange(phi_star.shape[0]) != pivot
    Q = Phi[:, keep] - Z[:, None] * phi_star[keep]
    ctx = ScoreContext(phi_star, pivot, Z, Q, theta[keep].copy(), y)
    if sigma2 is not None:
        ctx.sigma2 = float(sigma2)
    return ctx


def default_ridge_eta(S):
    dim = S.shape[0]
    if dim == 0:
        return 0.0
    tr = float(np.trace(S))
    return RIDGE_SCALE * tr / dim if tr > 0 else RIDGE_SCALE


def estimate_w_ridge(ctx, eta=None):
    """``(sum Q Q' + eta I)^{-1} sum Q Z``."""
    Q = ctx.Q
    if Q.shape[1] == 0:
        return np.zeros(0)
    S = Q.T @ Q
    if eta is None:
        eta = default_ridge_eta(S)
    if eta <= 0:
        raise ParameterRangeError("ridge eta must be positive")
    A = S + eta * np.eye(S.shape[0])
    return linalg.solve(A, Q.T @ ctx.Z, assume_a="pos")


def _lasso_kkt(M, h, lam, w):
    """Largest subgradient violation of ``w'Mw - 2h'w + lam*||w||_1``."""
    g = 2.0 * (h - M @ w)
    nz = w != 0.0
    viol = np.where(nz, np.abs(g - lam * np.sign(w)), np.maximum(np.abs(g) - lam, 0.0))
    return float(np.max(viol)) if viol.size else 0.0


def _lasso_solve(M, h, lam, w0=None, max_sweeps=20_000, tol=1e-10, kkt_tol=1e-4,
                 strict=True):
    """Coordinate descent with a KKT check relative to ``2 max|h|``.

    ``M`` is a squared scatter matrix and often singular, so the minimizer
    need not be unique and coordinate changes can linger along flat
    directions; acceptance is judged on the subgradient condition instead.
    """
    w = np.zeros(M.shape[0]) if w0 is None else np.array(w0, dtype=float)
    M = np.ascontiguousarray(M)
    h = np.ascontiguousarray(h)
    ref = 2.0 * float(np.max(np.abs(h))) if h.size else 0.0
    target = kkt_tol * max(ref, 1e-300)
    sweeps = 0
    kkt = _lasso_kkt(M, h, lam, w)
    while kkt > target and sweeps < max_sweeps:
        chunk = min(50, max_sweeps - sweeps)
        done, delta = _backend.lasso_cd(M, h, float(lam), w, chunk, tol)
        sweeps += done
        kkt = _lasso_kkt(M, h, lam, w)
        if delta <= tol and kkt > target:
            # coordinate moves are below resolution; continue without the early stop
            tol = 0.0
    if strict:
        if kkt > target:
            raise ConvergenceError(
                f"lasso coordinate descent did not converge (KKT residual {kkt:.3g})",
                residual=kkt, iterations=sweeps)
    return w


def _lasso_moments(Q, Z):
    n = Q.shape[0]
    sigma = Q.T @ Q / n
    gamma = Q.T @ Z / n
    return sigma @ sigma, sigma @ gamma


def lasso_lambda_max(ctx):
    M, h = _lasso_moments(ctx.Q, ctx.Z)
    return 2.0 * float(np.max(np.abs(h))) if h.size else 0.0


def estimate_w_lasso(ctx, lam=None, folds=LASSO_FOLDS, seed=0, grid=LASSO_GRID):
    """Minimize ``||(1/n) sum Q_i (Z_i - w'Q_i)||^2 + lam ||w||_1``.

    With ``lam=None`` the penalty is chosen by K-fold CV on the held-out
    error of predicting ``Z`` from ``Q``, falling back to ``0.1 * lam_max``
    when there are too few rows to cross-validate.
    """
    Q, Z = ctx.Q, ctx.Z
    if Q.shape[1] == 0:
        return np.zeros(0)
    M, h = _lasso_moments(Q, Z)
    lam_max = 2.0 * float(np.max(np.abs(h)))
    if lam is None:
        if lam_max == 0.0:
            return np.zeros(Q.shape[1])
        lam = _lasso_cv(Q, Z, lam_max, folds, seed, grid)
        ctx.details["lasso_lambda"] = lam
    if lam < 0:
        raise ParameterRangeError("lasso penalty must be nonnegative")
    return _lasso_solve(M, h, lam)


def _lasso_cv(Q, Z, lam_max, folds, seed, grid):
    from .model import fold_assignment

    n = Q.shape[0]
    K = min(folds, n)
    if K < 2:
        return 0.1 * lam_max
    lams = lam_max * np.logspace(0.0, -4.0, grid)
    labels = fold_assignment(n, K, seed)
    err = np.zeros(grid)
    for k in range(K):
        tr = labels != k
        M, h = _lasso_moments(Q[tr], Z[tr])
        w = None
        for i, lam in enumerate(lams):
            # tuning only needs approximate fits; the final solve is strict
            w = _lasso_solve(M, h, lam, w, max_sweeps=2000, strict=False)
            r = Z[~tr] - Q[~tr] @ w
            err[i] += float(r @ r)
    return float(lams[int(np.argmin(err))])


def interval_at(ctx, alpha=0.05, variant=None):
    """Invert the score test at level ``1 - alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterRangeError("alpha must lie in (0, 1)")
    if ctx.sigma2 is None or ctx.sigma2 <= 0:
        raise ParameterRangeError("sigma2 must be positive")
    if ctx.w is None:
        raise MRFAError("estimate w before building the interval")
    n = ctx.n
    b = ctx.b
    if not b > 0.0:
        raise IllConditionedError(f"information estimate b={b:.3g} is not positive")
    s = ctx.score(0.0)
    root = math.sqrt(b / n)
    lo = (-s + root * norm.ppf(alpha / 2.0)) / b
    hi = (-s + root * norm.ppf(1.0 - alpha / 2.0)) / b
    return Interval(lo, hi, 1.0 - alpha, ctx.sigma2, variant or ctx.w_method or "", -s / b, b)


def point_interval(Phi, y, theta, phi_star, sigma2, alpha=0.05, method="ridge", eta=None,
                   lam=None, seed=0):
    """Single-point convenience wrapper around the generic steps."""
    ctx = build_context(Phi, y, theta, phi_star, sigma2)
    if method == "ridge":
        ctx.w = estimate_w_ridge(ctx, eta)
    elif method == "lasso":
        ctx.w = estimate_w_lasso(ctx, lam, seed=seed)
    else:
        raise ParameterRangeError(f"unknown w method {method!r}")
    ctx.w_method = method
    return interval_at(ctx, alpha)


# -- batched model-level intervals --------------------------------------------

@dataclass
class IntervalSet:
    y_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    center: np.ndarray
    unit_halfwidth: np.ndarray
    b_unit: np.ndarray
    flagged: np.ndarray
    sigma2: float
    alpha: float
    variant: str
    conservative: bool = False
    details: dict = field(default_factory=dict)


class IntervalEngine:
    """Caches the training-side quantities shared by every prediction point.

    ``Phi`` is the design over the model's candidate columns at the scaled
    training inputs; the augmented constant column is implicit.
    """

    def __init__(self, model, Xs, y):
        self.model = model
        self.Xs = np.asarray(Xs, dtype=float)
        self.y = np.asarray(y, dtype=float).ravel()
        if self.Xs.shape[0] != self.y.shape[0]:
            raise DimensionError("training inputs and responses differ in length")
        self.n = self.y.shape[0]
        self.Phi = model.candidate_design(self.Xs)
        self.beta = model.coefficients()
        self.mean = self.Phi.mean(axis=0)
        self.Pc = self.Phi - self.mean
        self.res = self.y - (model.intercept + self.Phi @ self.beta)
        self.r_sum = float(self.res.sum())
        self.r_phi = self.Pc.T @ self.res
        self._eig = None

    @classmethod
    def from_data(cls, model, X, y):
        Xs, _ = model.scale(X)
        return cls(model, Xs, y)

    @property
    def p(self):
        return self.Phi.shape[1]

    def eig(self):
        if self._eig is None:
            C = self.Pc.T @ self.Pc
            lam, V = np.linalg.eigh(0.5 * (C + C.T))
            self._eig = (np.maximum(lam, 0.0), V, float(np.trace(C)))
        return self._eig

    def features(self, Xs_star):
        return self.model.candidate_design(np.asarray(Xs_star, dtype=float))

    def _ridge_w(self, D, eta=None):
        """Ridge weights for every column of ``D = mean - phi*`` (p x m)."""
        lam, V, trace = self.eig()
        n, p = self.n, self.p
        if p == 0:
            return np.zeros((0, D.shape[1]))
        if eta is None:
            # trace of sum Q Q' = trace(C) + n ||d||^2, per nuisance coordinate
            eta = RIDGE_SCALE * (trace + n * np.sum(D * D, axis=0)) / p
            eta = np.where(eta > 0, eta, RIDGE_SCALE)
        else:
            eta = np.full(D.shape[1], float(eta))
        VtD = V.T @ D
        Binv_d = V @ (VtD / (lam[:, None] + eta[None, :]))
        quad = np.sum(D * Binv_d, axis=0)
        return n * Binv_d / (1.0 + n * quad)

    def _lasso_w(self, D, Phi_star, seed):
        W = np.empty_like(D)
        Phi1 = np.hstack([np.ones((self.n, 1)), self.Phi])
        theta = np.concatenate([[self.model.intercept], self.beta])
        lams = []
        for j in range(D.shape[1]):
            ctx = build_context(Phi1, self.y, theta, np.concatenate([[1.0], Phi_star[j]]))
            W[:, j] = estimate_w_lasso(ctx, seed=seed)
            lams.append(ctx.details.get("lasso_lambda", 0.0))
        return W, lams

    def unit_intervals(self, Xs_star, method="ridge", eta=None, seed=0):
        """Centers, half-widths at ``sigma = 1`` and ``z = 1``, and flags."""
        Xs_star = np.atleast_2d(np.asarray(Xs_star, dtype=float))
        Phi_star = self.features(Xs_star)
        D = (self.mean[None, :] - Phi_star).T
        details = {}
        if method == "ridge":
            W = self._ridge_w(D, eta)
        elif method == "lasso":
            W, details["lasso_lambda"] = self._lasso_w(D, Phi_star, seed)
        else:
            raise ParameterRangeError(f"unknown w method {method!r}")
        wd = np.sum(W * D, axis=0)
        a_sum = self.n * (1.0 - wd)
        y_hat = self.model.intercept + Phi_star @ self.beta
        num = self.r_sum - W.T @ self.r_phi - wd * self.r_sum
        with np.errstate(divide="ignore", invalid="ignore"):
            center = y_hat + num / a_sum
            b_unit = 1.0 - wd
            half = 1.0 / np.sqrt(self.n * b_unit)
        flagged = ~(b_unit > 0.0) | ~np.isfinite(center)
        center = np.where(flagged, np.nan, center)
        half = np.where(flagged, np.nan, half)
        return y_hat, center, half, b_unit, flagged, details

    def intervals(self, Xs_star, alpha=0.05, sigma2=None, method="ridge", eta=None, seed=0,
                  variant=None):
        if not 0.0 < alpha < 1.0:
            raise ParameterRangeError("alpha must lie in (0, 1)")
        sigma2 = self.model.sigma2 if sigma2 is None else float(sigma2)
        if sigma2 is None or not sigma2 > 0:
            raise ParameterRangeError("a positive sigma2 is required")
        y_hat, center, half, b_unit, flagged, details = self.unit_intervals(
            Xs_star, method, eta, seed)
        z = norm.ppf(1.0 - alpha / 2.0)
        width = z * math.sqrt(sigma2) * half
        return IntervalSet(y_hat, center - width, center + width, center, half, b_unit,
                           flagged, sigma2, alpha, variant or f"{method}-w",
                           details=details)


@dataclass
class ApleyResult:
    sigma2: float
    coverage: float
    objective: float
    flat: bool
    grid: np.ndarray
    grid_coverage: np.ndarray
    ratios: np.ndarray


def _coverage_from_ratios(ratios, sigma):
    return float(np.mean(ratios <= sigma)) if ratios.size else 0.0


def choose_sigma2(ratios, alpha, reference):
    """Pick sigma^2 whose empirical coverage is closest to ``1 - alpha``.

    ``ratios`` are ``|y_i - c_i| / h_i`` with ``h_i`` the half-width at
    ``sigma = 1``; a point is covered iff its ratio is at most ``sigma``.
    Coverage only changes at the ratios, so the search checks a log grid
    over ``[1e-6, 1e2] * reference`` plus every positive finite squared
    ratio, which makes it exact even when the reference is badly scaled.
    Ties go to the smaller sigma^2.
    """
    all_ratios = np.asarray(ratios, dtype=float)
    lo, hi = 1e-6 * reference, 1e2 * reference
    grid = np.logspace(math.log10(lo), math.log10(hi), APLEY_GRID)
    grid_cov = np.array([_coverage_from_ratios(all_ratios, math.sqrt(s2)) for s2 in grid])
    finite = all_ratios[np.isfinite(all_ratios)]
    breaks = finite[finite > 0.0] ** 2
    cands = np.unique(np.concatenate([grid, breaks]))
    ratios = all_ratios
    cov = np.array([_coverage_from_ratios(ratios, math.sqrt(s2)) for s2 in cands])
    obj = np.abs(cov - (1.0 - alpha))
    best = int(np.argmin(obj))  # cands ascending, so ties resolve to the smaller sigma^2
    flat = bool(np.all(cov == cov[0]))
    return ApleyResult(float(cands[best]), float(cov[best]), float(obj[best]), flat, grid,
                       grid_cov, ratios)


def apley_sigma2(result, alpha=0.05, K=None, seed=0, method="ridge"):
    """Cross-validated sigma^2 calibrated to nominal coverage.

    Each fold's points get intervals from a model refit (same configuration
    and selection rule) on the remaining rows.
    """
    from .model import fit, replicate_folds

    Xs, y, config = result.Xs, result.y, result.config
    n = y.shape[0]
    K = min(10, n) if K is None else K
    if K < 2:
        raise ParameterRangeError("need at least 2 folds")
    folds = replicate_folds(Xs, K, seed)
    unit_ranges = np.column_stack([np.zeros(Xs.shape[1]), np.ones(Xs.shape[1])])
    ratios = np.full(n, np.inf)
    for k in range(K):
        tr = folds != k
        sub = fit(Xs[tr], y[tr], config, ranges=unit_ranges)
        engine = IntervalEngine(sub.model, sub.Xs, sub.y)
        _, center, half, _, flagged, _ = engine.unit_intervals(Xs[~tr], method, seed=seed)
        z = norm.ppf(1.0 - alpha / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs(y[~tr] - center) / (z * half)
        r[flagged] = np.inf
        ratios[~tr] = r
    ref = result.model.rss / (n - result.model.s) if n > result.model.s else 0.0
    if not ref > 0:
        ref = float(np.var(y))
    if not ref > 0:
        raise IllConditionedError("response has no variability to calibrate against")
    return choose_sigma2(ratios, alpha, ref)


def intervals(result, Xstar_scaled, alpha=0.05, variant="ridge", seed=0, K=None):
    """Intervals at scaled points for a :class:`~mrfa.model.FitResult`.

    ``variant`` is ``ridge`` or ``lasso`` (nuisance weights) or ``apley``
    (ridge weights with the cross-validated sigma^2).
    """
    engine = IntervalEngine(result.model, result.Xs, result.y)
    if variant == "apley":
        cal = apley_sigma2(result, alpha, K, seed)
        out = engine.intervals(Xstar_scaled, alpha, cal.sigma2, "ridge", seed=seed,
                               variant="apley-corrected")
        out.details["apley"] = cal
        return out
    if variant not in ("ridge", "lasso"):
        raise ParameterRangeError(f"unknown interval variant {variant!r}")
    out = engine.intervals(Xstar_scaled, alpha, None, variant, seed=seed)
    out.conservative = result.model.sigma2_kind == "floor"
    return out
