"""Overlapping group lasso with strong heredity, fitted along a lambda path.

The overlapping penalty is handled through duplicated coefficients: every
group ``J_j`` owns a private slot vector over its member columns and the
fitted coefficient of a column is the sum of its slots. The objective is

    (1/2n) ||y - b0 - Phi beta||^2 + lam * sum_j sqrt(N_j) ||slots_j||_2

with an unpenalized intercept ``b0``. Everything runs on the centered Gram
matrix ``G = Phi_c' Phi_c / n``, so a sweep costs ``O(p * sum_j d_j)``
regardless of ``n``. Each block is minimized exactly through the
eigendecomposition of its Gram block and a one-dimensional secular equation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

from . import _backend
from .errors import CapacityError, ConvergenceError, DimensionError, NumericError
from .heredity import (
    GroupStructure,
    ancestors,
    downward_closure,
    group_weight,
    is_heredity_closed,
)
from .kernels import DEFAULT_ATOM_CAP, DEFAULT_SCHEDULE, Schedule, build_atoms

_DEAD_VAR = 1e-20
_INPUT_SLACK = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    d_max: int = 10
    r_max: int = 10
    k: int = 2
    schedule: Schedule = DEFAULT_SCHEDULE
    atom_cap: int = DEFAULT_ATOM_CAP
    rho: float = 0.96
    lambda_min_ratio: float = 1e-4
    max_terms: Optional[int] = None
    rss_tol: float = 1e-4
    rss_window: int = 10
    max_steps: int = 2000
    kkt_tol: float = 1e-4
    obj_tol: float = 1e-7
    max_sweeps: int = 10_000
    max_group_size: int = 3000
    memory_limit_mb: float = 2048.0
    standardize: bool = True
    rank_tol: float = 1e-10

    def __post_init__(self):
        if self.d_max < 1 or self.r_max < 1:
            raise ValueError("d_max and r_max must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 <= self.lambda_min_ratio < 1.0:
            raise ValueError("lambda_min_ratio must lie in [0, 1)")


@dataclass
class DuplicatedCoefficients:
    """Slot vectors per group; ``members[j]`` lists the column ids of group j."""

    keys: list
    members: list
    blocks: list

    def copy(self):
        return DuplicatedCoefficients(list(self.keys), list(self.members),
                                      [b.copy() for b in self.blocks])

    def block(self, key):
        return self.blocks[self.keys.index(key)]

    def norms(self):
        return np.array([float(np.linalg.norm(b)) for b in self.blocks])

    def nonzero_keys(self):
        return [k for k, b in zip(self.keys, self.blocks) if np.any(b != 0.0)]


def collapse(beta_z, p=None):
    """Collapsed coefficients: each column's value is the sum of its slots."""
    if p is None:
        p = 1 + max((int(m.max()) for m in beta_z.members if len(m)), default=-1)
    out = np.zeros(p)
    for m, b in zip(beta_z.members, beta_z.blocks):
        np.add.at(out, m, b)
    return out


@dataclass
class _Group:
    key: Hashable
    cols: np.ndarray
    weight: float
    live_idx: np.ndarray = None
    live_cols: np.ndarray = None
    runs: list = None
    eig: tuple = None


def _runs(cols):
    """Split sorted column ids into contiguous ``(start, stop, offset)`` runs."""
    out = []
    if len(cols) == 0:
        return out
    start = prev = int(cols[0])
    off = 0
    for i, c in enumerate(cols[1:], 1):
        c = int(c)
        if c != prev + 1:
            out.append((start, prev + 1, off))
            start, off = c, i
        prev = c
    out.append((start, prev + 1, off))
    return out


@dataclass
class FitInfo:
    sweeps: int
    kkt: float
    objective: float
    objective_trace: list
    monotone: bool
    start_gradient: np.ndarray = None


class GroupLassoProblem:
    """Incrementally growable overlapping group-lasso problem.

    Columns are appended with :meth:`add_columns`, groups with
    :meth:`add_group`; cached Gram quantities never need recomputation.
    """

    def __init__(self, y, standardize=False, rank_tol=1e-10):
        self.standardize = bool(standardize)
        self.rank_tol = float(rank_tol)
        y = np.asarray(y, dtype=np.float64).ravel()
        if not np.all(np.isfinite(y)):
            raise NumericError("response contains NaN or Inf")
        self.n = y.shape[0]
        self.y = y
        self.y_mean = float(y.mean())
        self.y_c = y - self.y_mean
        self.yy = float(self.y_c @ self.y_c) / self.n
        self.p = 0
        self._cap = 0
        self._phi = np.zeros((self.n, 0))
        self._G = np.zeros((0, 0))
        self.means = np.zeros(0)
        self.c0 = np.zeros(0)
        self.dead = np.zeros(0, dtype=bool)
        self.groups: list = []
        self._index = {}

    # -- growth -----------------------------------------------------------
    @property
    def phi(self):
        return self._phi[:, :self.p]

    @property
    def G(self):
        return self._G[:self.p, :self.p]

    def _reserve(self, p_new):
        if p_new <= self._cap:
            return
        cap = max(p_new, 2 * self._cap, 16)
        phi = np.zeros((self.n, cap))
        phi[:, :self.p] = self._phi[:, :self.p]
        G = np.zeros((cap, cap))
        G[:self.p, :self.p] = self._G[:self.p, :self.p]
        self._phi, self._G, self._cap = phi, G, cap

    def add_columns(self, block):
        """Append raw design columns; returns their global ids."""
        block = np.asarray(block, dtype=np.float64)
        if block.ndim != 2 or block.shape[0] != self.n:
            raise DimensionError(f"column block must have {self.n} rows")
        if not np.all(np.isfinite(block)):
            raise NumericError("design block contains NaN or Inf")
        a = block.shape[1]
        p0 = self.p
        self._reserve(p0 + a)
        m = block.mean(axis=0)
        bc = block - m
        # centered columns sum to zero, so bc' Phi_c = bc' Phi
        cross = bc.T @ self._phi[:, :p0] / self.n
        self._G[p0:p0 + a, :p0] = cross
        self._G[:p0, p0:p0 + a] = cross.T
        self._G[p0:p0 + a, p0:p0 + a] = bc.T @ bc / self.n
        self._phi[:, p0:p0 + a] = block
        self.means = np.concatenate([self.means, m])
        self.c0 = np.concatenate([self.c0, bc.T @ self.y_c / self.n])
        var = np.diag(self._G)[p0:p0 + a]
        self.dead = np.concatenate([self.dead, var <= _DEAD_VAR])
        self.p = p0 + a
        return np.arange(p0, p0 + a)

    def add_group(self, key, cols, weight):
        cols = np.sort(np.asarray(cols, dtype=np.intp))
        if key in self._index:
            raise ValueError(f"group {key!r} already present")
        if len(cols) and (cols[0] < 0 or cols[-1] >= self.p):
            raise DimensionError("group refers to unknown columns")
        grp = _Group(key, cols, float(weight))
        live = ~self.dead[cols]
        grp.live_idx = np.flatnonzero(live)
        grp.live_cols = cols[live]
        grp.runs = _runs(grp.live_cols)
        self._index[key] = len(self.groups)
        self.groups.append(grp)
        return grp

    def memory_bytes(self, extra_cols=0, extra_group=0):
        p = self.p + extra_cols
        eig = sum(len(g.live_cols) ** 2 for g in self.groups) + extra_group ** 2
        return 8 * (self.n * p + p * p + eig)

    # -- coefficients -----------------------------------------------------
    def zeros(self):
        return DuplicatedCoefficients([g.key for g in self.groups],
                                      [g.cols for g in self.groups],
                                      [np.zeros(len(g.cols)) for g in self.groups])

    def conform(self, beta_z):
        """Return slots aligned with the current groups (new groups zero)."""
        out = self.zeros()
        if beta_z is None:
            return out
        lookup = dict(zip(beta_z.keys, beta_z.blocks))
        for j, grp in enumerate(self.groups):
            if grp.key in lookup:
                b = lookup[grp.key]
                if b.shape != out.blocks[j].shape:
                    raise DimensionError(f"warm start block for {grp.key!r} has wrong size")
                out.blocks[j] = b.copy()
        return out

    def collapse(self, beta_z):
        return collapse(beta_z, self.p)

    def intercept(self, beta):
        return self.y_mean - float(self.means[:len(beta)] @ beta)

    def fitted(self, beta):
        return self.intercept(beta) + self._phi[:, :len(beta)] @ beta

    def rss(self, beta):
        r = self.y - self.fitted(beta)
        return float(r @ r)

    def gradient(self, beta):
        """``(1/n) Phi_c' (y_c - Phi_c beta)`` over all columns."""
        return self.c0 - self.G @ beta

    # -- optimality -------------------------------------------------------
    def lambda_max(self):
        """Smallest lambda at which all-zero slots satisfy the KKT conditions."""
        if not self.groups:
            raise ValueError("no candidate groups")
        best = 0.0
        for grp in self.groups:
            if grp.weight <= 0 or len(grp.live_cols) == 0:
                continue
            norm = float(np.linalg.norm(self._block_grad(grp, self.c0)))
            best = max(best, norm / grp.weight)
        return best

    def _block_norm(self, grp, b):
        """Norm entering the penalty: ``||v||`` or, standardized, ``||Phi_J v|| / sqrt(n)``."""
        v = b[grp.live_idx]
        if not self.standardize:
            return float(np.linalg.norm(v))
        if not np.any(v):
            return 0.0
        _, Uk, sk = self._eig(grp)
        return float(np.linalg.norm(sk * (Uk.T @ v)))

    def _block_grad(self, grp, g):
        """Negative loss gradient in the block's penalized coordinates."""
        gj = g[grp.live_cols]
        if not self.standardize:
            return gj
        _, Uk, sk = self._eig(grp)
        return (Uk.T @ gj) / sk

    def _block_coords(self, grp, b):
        v = b[grp.live_idx]
        if not self.standardize:
            return v
        _, Uk, sk = self._eig(grp)
        return sk * (Uk.T @ v)

    def block_norms(self, beta_z):
        return np.array([self._block_norm(grp, b) for grp, b in zip(self.groups, beta_z.blocks)])

    def penalty(self, beta_z, lam):
        return lam * float(self.block_norms(beta_z) @ self._weights())

    def objective(self, beta_z, lam):
        beta = self.collapse(beta_z)
        return 0.5 * self.rss(beta) / self.n + self.penalty(beta_z, lam)

    def _gram_objective(self, beta, g, norms, lam):
        loss = 0.5 * (self.yy - float(self.c0 @ beta) - float(g @ beta))
        return loss + lam * float(norms @ self._weights())

    def _weights(self):
        return np.array([grp.weight for grp in self.groups])

    def kkt_residual(self, beta_z, lam, g=None):
        """Largest violation of the group-lasso optimality conditions."""
        if g is None:
            g = self.gradient(self.collapse(beta_z))
        worst = 0.0
        for grp, b in zip(self.groups, beta_z.blocks):
            worst = max(worst, self._group_kkt(grp, b, g, lam))
        return worst

    def _group_kkt(self, grp, b, g, lam):
        if len(grp.live_cols) == 0:
            return 0.0
        mu = lam * grp.weight
        gj = self._block_grad(grp, g)
        w = self._block_coords(grp, b)
        nw = float(np.linalg.norm(w))
        if nw > 0.0:
            return float(np.max(np.abs(gj - mu * w / nw)))
        return max(0.0, float(np.linalg.norm(gj)) - mu)

    # -- block coordinate descent -----------------------------------------
    def _eig(self, grp):
        """``(e, U_k, sqrt(e_k))``: block Gram eigenpairs plus the retained part."""
        if grp.eig is None:
            J = grp.live_cols
            H = self.G[np.ix_(J, J)]
            e, U = np.linalg.eigh(0.5 * (H + H.T))
            e = np.maximum(e, 0.0)
            keep = e > self.rank_tol * (float(e.max()) if len(e) else 0.0)
            keep &= e > 0.0
            grp.eig = (e, np.ascontiguousarray(U), None)
            if self.standardize:
                grp.eig = (e, np.ascontiguousarray(U[:, keep]), np.sqrt(e[keep]))
            else:
                grp.eig = (e, np.ascontiguousarray(U), keep)
        return grp.eig

    def _update(self, grp, b, g, beta, lam):
        """Exactly minimize over one slot block; returns the max abs change."""
        if len(grp.live_cols) == 0:
            return 0.0
        mu = lam * grp.weight
        v = b[grp.live_idx]
        if self.standardize:
            _, Uk, sk = self._eig(grp)
            # orthonormalized block: plain group soft-thresholding
            z = (Uk.T @ g[grp.live_cols]) / sk + sk * (Uk.T @ v)
            zn = float(np.linalg.norm(z))
            if zn <= mu:
                vnew = np.zeros_like(v)
            else:
                vnew = Uk @ (z * ((1.0 - mu / zn) / sk))
        else:
            e, U, keep = self._eig(grp)
            c = U.T @ g[grp.live_cols] + e * (U.T @ v)
            cn = float(np.linalg.norm(c))
            if mu > 0.0 and cn <= mu:
                vnew = np.zeros_like(v)
            elif mu > 0.0:
                t = _backend.secular_root(e, c * c, mu)
                vnew = U @ (c * (t / (e * t + mu)))
            else:
                vnew = U @ np.where(keep, c / np.where(keep, e, 1.0), 0.0)
        delta = vnew - v
        change = float(np.max(np.abs(delta)))
        if change == 0.0:
            return 0.0
        b[grp.live_idx] = vnew
        G = self._G
        for start, stop, off in grp.runs:
            d = delta[off:off + stop - start]
            beta[start:stop] += d
            g[:self.p] -= d @ G[start:stop, :self.p]
        return change

    def fit(self, lam, warm_start=None, kkt_tol=None, obj_tol=1e-7, max_sweeps=10_000):
        """Minimize the objective at ``lam`` from ``warm_start``.

        ``kkt_tol`` is absolute; by default ``1e-4 * ||y_c|| / sqrt(n)``.
        """
        if lam < 0 or not math.isfinite(lam):
            raise ValueError("lambda must be finite and nonnegative")
        if kkt_tol is None:
            kkt_tol = 1e-4 * math.sqrt(self.yy)
        beta_z = self.conform(warm_start)
        beta = self.collapse(beta_z)
        g = self.gradient(beta)
        g_start = g.copy()
        blocks = beta_z.blocks
        groups = self.groups
        trace = [self._gram_objective(beta, g, self.block_norms(beta_z), lam)]
        monotone = True
        sweeps = 0
        kkt = math.inf

        def record():
            nonlocal monotone
            val = self._gram_objective(beta, g, self.block_norms(beta_z), lam)
            if val > trace[-1] + 1e-12 * max(1.0, abs(trace[-1])):
                monotone = False
            trace.append(val)
            return val

        while sweeps < max_sweeps:
            sweeps += 1
            for j, grp in enumerate(groups):
                self._update(grp, blocks[j], g, beta, lam)
            record()
            working = [j for j in range(len(groups)) if np.any(blocks[j] != 0.0)]
            # settle the nonzero groups before paying for another full sweep
            while working and sweeps < max_sweeps:
                sweeps += 1
                for j in working:
                    self._update(groups[j], blocks[j], g, beta, lam)
                prev = trace[-1]
                val = record()
                inner = max(self._group_kkt(groups[j], blocks[j], g, lam) for j in working)
                if inner <= 0.5 * kkt_tol:
                    break
                if abs(prev - val) <= obj_tol * 1e-3 * max(abs(val), 1e-300):
                    break
            # refresh the gradient to stop drift from incremental updates
            g[:] = self.gradient(beta)
            kkt = self.kkt_residual(beta_z, lam, g)
            if kkt <= kkt_tol:
                break
        if kkt > kkt_tol:
            raise ConvergenceError(
                f"block coordinate descent did not reach KKT tolerance {kkt_tol:.3g} "
                f"in {max_sweeps} sweeps (residual {kkt:.3g})",
                residual=kkt, iterations=sweeps)
        info = FitInfo(sweeps, kkt, trace[-1], trace, monotone, g_start)
        return beta_z, info


# -- public operations ---------------------------------------------------------

def lambda_max(problem):
    return problem.lambda_max()


def fit_at_lambda(problem, lam, warm_start=None, **kwargs):
    return problem.fit(lam, warm_start, **kwargs)


def kkt_residual(problem, beta_z, lam):
    return problem.kkt_residual(problem.conform(beta_z), lam)


# -- multi-resolution basis bookkeeping ---------------------------------------

class BasisLayout:
    """Column layout of the candidate basis, in the order effects were added."""

    def __init__(self):
        self.effects: list = []
        self.atoms: dict = {}
        self.start: dict = {}
        self.stop: dict = {}

    def add(self, g, atoms, cols):
        self.effects.append(g)
        self.atoms[g] = atoms
        self.start[g] = int(cols[0]) if len(cols) else 0
        self.stop[g] = int(cols[-1]) + 1 if len(cols) else 0

    @property
    def p(self):
        return max(self.stop.values(), default=0)

    def counts(self):
        return {g: len(a) for g, a in self.atoms.items()}

    def group_columns(self, g):
        cols = [np.arange(self.start[a], self.stop[a]) for a in ancestors(g)]
        return np.sort(np.concatenate(cols)) if cols else np.zeros(0, dtype=np.intp)

    def effects_upto(self, p):
        return [g for g in self.effects if self.stop[g] <= p]

    def effect_of_column(self):
        out = np.empty(self.p, dtype=object)
        for g in self.effects:
            out[self.start[g]:self.stop[g]] = [g] * (self.stop[g] - self.start[g])
        return out


@dataclass
class PathPoint:
    lam: float
    beta_z: DuplicatedCoefficients
    beta: np.ndarray
    intercept: float
    active: tuple
    nonzero_groups: tuple
    entered: tuple
    candidates: tuple
    n_columns: int
    rss: float
    s: int
    sweeps: int
    kkt: float
    objective: float
    stable: bool


@dataclass
class Path:
    points: list
    layout: BasisLayout
    problem: GroupLassoProblem
    config: SolverConfig
    lambda_max: float
    stop_reason: str = ""
    blocked: dict = field(default_factory=dict)
    support_bound_ok: bool = True

    def entry_order(self):
        """Groups in the order they first became nonzero along the path."""
        seen, out = set(), []
        for pt in self.points:
            for g in pt.entered:
                if g not in seen:
                    seen.add(g)
                    out.append(g)
        return out

    @property
    def lambdas(self):
        return np.array([pt.lam for pt in self.points])

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def distinct_rows(X):
    return int(np.unique(np.asarray(X), axis=0).shape[0])


def _check_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise DimensionError("X must be a 2-D array")
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("inputs contain NaN or Inf")
    if X.size and (X.min() < -_INPUT_SLACK or X.max() > 1 + _INPUT_SLACK):
        raise ValueError("X must be rescaled to [0, 1]^d before fitting")
    return X, y


def solve_path(X, y, config=None, lambdas=None):
    """Fit the heredity-constrained group lasso along a decreasing lambda path.

    With ``lambdas`` given the path follows that grid exactly (used for
    cross-validation); otherwise it starts at ``lambda_max`` and shrinks by
    ``config.rho`` until a stopping rule fires.
    """
    config = config or SolverConfig()
    X, y = _check_inputs(X, y)
    n, d = X.shape
    # beyond one coefficient per distinct input the fit can interpolate
    if config.max_terms is None:
        max_terms = distinct_rows(X)
    else:
        max_terms = config.max_terms if config.max_terms > 0 else math.inf
    problem = GroupLassoProblem(y, config.standardize, config.rank_tol)
    layout = BasisLayout()
    structure = GroupStructure.initial(d, config.d_max, config.r_max)
    blocked = {}
    memory_limit = config.memory_limit_mb * 2 ** 20

    def add_candidates(groups):
        """Add effect columns and groups; returns False if memory ran out."""
        for g in sorted(groups):
            try:
                atoms = build_atoms(g, g.r, config.schedule, config.k, config.atom_cap,
                                    config.d_max, config.r_max)
            except CapacityError as exc:
                if not problem.groups:
                    raise
                blocked[g] = str(exc)
                structure.candidates.discard(g)
                continue
            counts = layout.counts()
            counts[g] = len(atoms)
            size = group_weight(g, counts)
            if size > config.max_group_size:
                if not problem.groups:
                    raise CapacityError(
                        f"{g!r} spans {size} coefficients, above max_group_size", group=g)
                blocked[g] = f"{g!r} spans {size} coefficients, above max_group_size"
                structure.candidates.discard(g)
                continue
            if problem.groups and problem.memory_bytes(len(atoms), size) > memory_limit:
                structure.candidates.discard(g)
                blocked[g] = f"{g!r} would exceed the memory limit"
                return False
            cols = problem.add_columns(atoms.evaluate(X))
            layout.add(g, atoms, cols)
            structure.register(g, len(atoms))
            dead = int(problem.dead[cols].sum())
            if dead:
                warnings.warn(f"{g!r}: {dead} basis columns vanish on the data and are "
                              "excluded from the fit", RuntimeWarning, stacklevel=3)
            problem.add_group(g, layout.group_columns(g), math.sqrt(size))
        return True

    add_candidates(structure.candidates)
    lam_max = problem.lambda_max()
    if lambdas is not None:
        grid = [float(v) for v in lambdas]
        if any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly decreasing")
    else:
        grid = None
    lam_min = config.lambda_min_ratio * lam_max
    kkt_tol = config.kkt_tol * math.sqrt(problem.yy)

    points = []
    beta_z = None
    stop_reason = ""
    support_ok = True
    lam = grid[0] if grid else lam_max
    step = 0
    while True:
        try:
            beta_z, info = problem.fit(lam, beta_z, kkt_tol=kkt_tol, obj_tol=config.obj_tol,
                                       max_sweeps=config.max_sweeps)
        except ConvergenceError:
            if not points:
                raise
            stop_reason = "instability"
            break
        beta = problem.collapse(beta_z)
        nonzero = tuple(sorted(beta_z.nonzero_keys()))
        active = tuple(sorted(downward_closure(nonzero)))
        if len(nonzero) > n:
            support_ok = False
        prev = set(points[-1].nonzero_groups) if points else set()
        # order simultaneous entries by when they would have entered on a finer grid
        crit = {}
        for key in set(nonzero) - prev:
            grp = problem.groups[problem._index[key]]
            crit[key] = float(np.linalg.norm(problem._block_grad(grp, info.start_gradient))) / grp.weight
        entered = tuple(sorted(crit, key=lambda key: (-crit[key], key)))
        structure.active = set(active)
        pt = PathPoint(
            lam=float(lam), beta_z=beta_z.copy(), beta=beta, intercept=problem.intercept(beta),
            active=active, nonzero_groups=nonzero, entered=entered,
            candidates=tuple(sorted(structure.candidates)), n_columns=problem.p,
            rss=problem.rss(beta), s=int(np.count_nonzero(beta)), sweeps=info.sweeps,
            kkt=info.kkt, objective=info.objective, stable=info.monotone)
        points.append(pt)
        step += 1

        changed = len(points) == 1 or set(active) != set(points[-2].active)
        if changed and active:
            added = structure.expand() - set(problem._index)
            structure.candidates -= set(blocked)
            added -= set(blocked)
            if added and not add_candidates(added):
                stop_reason = "memory"
        if stop_reason:
            break
        if grid is not None:
            if step >= len(grid):
                stop_reason = "grid"
                break
            lam = grid[step]
            continue
        if pt.rss <= 1e-30 * max(problem.yy * n, 1e-300):
            stop_reason = "perfect_fit"
            break
        if pt.s >= max_terms:
            stop_reason = "max_terms"
            break
        w = config.rss_window
        if len(points) > w and points[-1 - w].s > 0:
            old = points[-1 - w].rss
            if old - pt.rss <= config.rss_tol * old:
                stop_reason = "rss"
                break
        if step >= config.max_steps:
            stop_reason = "max_steps"
            break
        lam = lam * config.rho
        if lam < lam_min:
            stop_reason = "lambda_min"
            break

    for pt in points:
        if not is_heredity_closed(pt.active):
            raise AssertionError("active set lost heredity closure")
    return Path(points, layout, problem, config, lam_max, stop_reason, blocked, support_ok)
