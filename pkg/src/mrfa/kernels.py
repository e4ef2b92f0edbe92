"""Compactly supported Wendland basis functions on a multi-resolution grid.

The radial profile for effect dimension ``m`` and smoothness ``k`` is built
from the truncated power ``(1 - t)_+^l``, ``l = floor(m/2) + k + 1``, by
applying ``(I f)(t) = int_t^1 s f(s) ds`` ``k`` times and rescaling to 1 at
the origin. The result always factors as ``(1 - t)^(l+k) q(t)`` with ``q`` of
degree ``k``; we evaluate it in that form so there is no cancellation near
the edge of the support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy import sparse

from . import _backend
from .errors import CapacityError, DimensionError, ParameterRangeError
from .heredity import EffectResolution

K_MAX = 4
ZERO_TOL = 1e-12
DEFAULT_ATOM_CAP = 100_000


def _binomial_poly(l):
    return [Fraction(math.comb(l, i) * (-1) ** i) for i in range(l + 1)]


def _integrate_op(p):
    # (I p)(t) = int_t^1 s p(s) ds = A(1) - A(t), A' = s p(s)
    anti = [Fraction(0), Fraction(0)] + [c / (i + 2) for i, c in enumerate(p)]
    total = sum(anti)
    out = [-c for c in anti]
    out[0] += total
    return out


def _divide_one_minus_t(p):
    # p(t) = (1 - t) s(t); synthetic division by (t - 1), then negate
    deg = len(p) - 1
    quot = [Fraction(0)] * deg
    rem = p[deg]
    for i in range(deg - 1, -1, -1):
        quot[i] = rem
        rem = p[i] + rem
    if rem != 0:
        raise ArithmeticError("polynomial is not divisible by (1 - t)")
    return [-c for c in quot]


@lru_cache(maxsize=None)
def wendland_coefficients(m, k):
    """Exact ``(exponent, q)`` with profile ``(1-t)^exponent * q(t)``, ``q(0)=1``.

    ``q`` is a tuple of :class:`fractions.Fraction` in increasing degree.
    """
    l = m // 2 + k + 1
    p = _binomial_poly(l)
    for _ in range(k):
        p = _integrate_op(p)
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    expo = l + k
    q = p
    for _ in range(expo):
        q = _divide_one_minus_t(q)
    scale = q[0]
    return expo, tuple(c / scale for c in q)


@dataclass(frozen=True)
class WendlandKernel:
    smoothness_k: int = 2
    effect_dim_m: int = 1

    def __post_init__(self):
        _check_km(self.effect_dim_m, self.smoothness_k, None)

    @cached_property
    def exponent(self):
        return wendland_coefficients(self.effect_dim_m, self.smoothness_k)[0]

    @cached_property
    def q(self):
        q = wendland_coefficients(self.effect_dim_m, self.smoothness_k)[1]
        return np.array([float(c) for c in q])

    def profile(self, radius):
        r = np.asarray(radius, dtype=np.float64)
        if np.any(r < 0):
            raise ParameterRangeError("radius must be nonnegative")
        inside = r < 1.0
        rr = np.where(inside, r, 1.0)
        poly = np.zeros_like(rr)
        for c in self.q[::-1]:
            poly = poly * rr + c
        val = poly
        s = 1.0 - rr
        for _ in range(self.exponent):
            val = val * s
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)


def _check_km(m, k, d_max):
    if not isinstance(k, (int, np.integer)) or k < 0 or k > K_MAX:
        raise ParameterRangeError(f"smoothness k must be an integer in [0, {K_MAX}], got {k!r}")
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ParameterRangeError(f"effect dimension m must be a positive integer, got {m!r}")
    if d_max is not None and m > d_max:
        raise ParameterRangeError(f"effect dimension m={m} exceeds D_max={d_max}")


def wendland_profile(radius, m, k, d_max=10):
    """Normalized Wendland profile of dimension ``m`` and smoothness ``k``."""
    _check_km(m, k, d_max)
    if radius < 0:
        raise ParameterRangeError("radius must be nonnegative")
    return float(WendlandKernel(int(k), int(m)).profile(float(radius)))


@dataclass(frozen=True)
class Schedule:
    """Center-count and bandwidth schedule per resolution level.

    Level ``r`` has ``g0 * growth**(r-1)`` evenly spaced 1-D centers on
    [0, 1] and bandwidth ``h0 * decay**(r-1)``.
    """

    g0: int = 5
    growth: int = 2
    h0: float = 0.75
    decay: float = 2.0 / 3.0

    def count(self, r):
        return int(self.g0 * self.growth ** (r - 1))

    def bandwidth(self, r):
        return float(self.h0 * self.decay ** (r - 1))

    def to_dict(self):
        return {"g0": self.g0, "growth": self.growth, "h0": self.h0, "decay": self.decay}


DEFAULT_SCHEDULE = Schedule()


@dataclass(frozen=True)
class ResolutionLevel:
    level: int
    centers_1d: tuple
    bandwidth: float


def level_schedule(r, schedule=DEFAULT_SCHEDULE, r_max=10):
    if not isinstance(r, (int, np.integer)) or r < 1 or r > r_max:
        raise ParameterRangeError(f"resolution level must be in [1, {r_max}], got {r!r}")
    g = schedule.count(r)
    if g < 2:
        raise ParameterRangeError("each level needs at least two centers")
    centers = tuple(float(c) for c in np.linspace(0.0, 1.0, g))
    return ResolutionLevel(int(r), centers, schedule.bandwidth(r))


@dataclass(frozen=True)
class BasisAtom:
    owner: EffectResolution
    center: tuple
    bandwidth: float
    kernel: WendlandKernel

    def __call__(self, x):
        """Evaluate at one full input vector ``x`` (scaled to [0, 1])."""
        x = np.asarray(x, dtype=np.float64)
        xu = x[[j - 1 for j in self.owner.u]]
        # the bulk kernel keeps single and block evaluation bitwise identical
        block = _backend.wendland_block(xu[None, :], np.asarray([self.center], dtype=np.float64),
                                        1.0 / self.bandwidth, self.kernel.q,
                                        self.kernel.exponent, ZERO_TOL)
        return float(block[0, 0])


class AtomSet:
    """The ordered atoms of one ``(u, r)``; behaves like a list of BasisAtom.

    Centers are kept as one array so design blocks can be evaluated in bulk.
    """

    def __init__(self, owner, centers, bandwidth, kernel):
        self.owner = owner
        self.centers = np.ascontiguousarray(centers, dtype=np.float64)
        self.bandwidth = float(bandwidth)
        self.kernel = kernel

    def __len__(self):
        return self.centers.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(len(self))[i]]
        return BasisAtom(self.owner, tuple(self.centers[i]), self.bandwidth, self.kernel)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, idx):
        return AtomSet(self.owner, self.centers[np.asarray(idx, dtype=int)],
                       self.bandwidth, self.kernel)

    def evaluate(self, X):
        """Dense ``n x len(self)`` block at scaled inputs ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError("X must be a 2-D array")
        if max(self.owner.u) > X.shape[1]:
            raise DimensionError(
                f"effect {self.owner!r} needs {max(self.owner.u)} columns, X has {X.shape[1]}")
        xu = np.ascontiguousarray(X[:, [j - 1 for j in self.owner.u]])
        if len(self) == 0:
            return np.zeros((X.shape[0], 0))
        return _backend.wendland_block(xu, self.centers, 1.0 / self.bandwidth,
                                       self.kernel.q, self.kernel.exponent, ZERO_TOL)


def atom_count(u_size, r, schedule=DEFAULT_SCHEDULE):
    return schedule.count(r) ** u_size


def build_atoms(u, r, schedule=DEFAULT_SCHEDULE, k=2, atom_cap=DEFAULT_ATOM_CAP,
                d_max=10, r_max=10):
    """All atoms of the pair ``(u, r)`` on the factorial grid of level centers."""
    owner = u if isinstance(u, EffectResolution) else EffectResolution(tuple(u), r)
    m = len(owner.u)
    if m > d_max:
        raise ParameterRangeError(f"|u|={m} exceeds D_max={d_max}")
    level = level_schedule(owner.r, schedule, r_max)
    count = len(level.centers_1d) ** m
    if count > atom_cap:
        raise CapacityError(
            f"{owner!r} needs {count} basis functions, above the cap of {atom_cap}",
            group=owner)
    grid = np.array(list(itertools.product(level.centers_1d, repeat=m)), dtype=np.float64)
    kernel = WendlandKernel(k, m)
    return AtomSet(owner, grid.reshape(count, m), level.bandwidth * math.sqrt(m), kernel)


def design_columns(atoms, X):
    """Sparse (CSC) design block: entry (i, j) is atom j at row i of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-D array")
    if not isinstance(atoms, AtomSet):
        atoms = list(atoms)
        if not atoms:
            return sparse.csc_matrix((X.shape[0], 0))
        blocks = [AtomSet(a.owner, np.asarray([a.center]), a.bandwidth, a.kernel).evaluate(X)
                  for a in atoms]
        return sparse.csc_matrix(np.hstack(blocks))
    return sparse.csc_matrix(atoms.evaluate(X))
