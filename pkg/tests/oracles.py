"""Independent reference implementations used by the test-suite.

Nothing here imports the package's numerical code: each oracle is written
from the mathematical definition so agreement is evidence of correctness.
"""

import math

import numpy as np
import sympy as sp


# -- overlapping group lasso ----------------------------------------------------

def random_overlap_instance(rng, n=50, max_groups=8, max_slots=60, max_cols=40):
    """Random design plus overlapping groups over its columns.

    Returns ``(Phi, y, groups, weights)`` with ``groups`` a list of sorted
    column-index arrays whose total length is at most ``max_slots``.
    """
    p = int(rng.integers(6, max_cols + 1))
    Phi = rng.standard_normal((n, p))
    beta = np.zeros(p)
    support = rng.choice(p, size=max(1, p // 4), replace=False)
    beta[support] = rng.standard_normal(support.size)
    y = Phi @ beta + 0.5 * rng.standard_normal(n) + rng.normal()
    n_groups = int(rng.integers(2, max_groups + 1))
    groups = []
    covered = set()
    budget = max_slots
    for j in range(n_groups):
        left = n_groups - j
        size = int(rng.integers(1, max(2, min(p, budget - (left - 1)) // 2 + 1)))
        cols = np.sort(rng.choice(p, size=size, replace=False))
        groups.append(cols)
        covered.update(cols.tolist())
        budget -= size
    # every column must belong to some group or it is unpenalized noise
    rest = np.array(sorted(set(range(p)) - covered), dtype=int)
    if rest.size:
        groups[-1] = np.union1d(groups[-1], rest)
    if sum(len(g) for g in groups) > max_slots:
        return random_overlap_instance(rng, n, max_groups, max_slots, max_cols)
    weights = np.array([math.sqrt(len(g)) for g in groups])
    return Phi, y, groups, weights


def _centered(Phi, y):
    return Phi - Phi.mean(axis=0), y - y.mean()


def overlap_objective(Phi, y, groups, weights, slots, lam):
    """``(1/2n)||y_c - Phi_c sum slots||^2 + lam * sum w_g ||slot_g||`` (intercept profiled)."""
    Pc, yc = _centered(Phi, y)
    beta = collapse_bruteforce(groups, slots, Phi.shape[1])
    r = yc - Pc @ beta
    pen = sum(w * np.linalg.norm(s) for w, s in zip(weights, slots))
    return 0.5 * float(r @ r) / Phi.shape[0] + lam * pen


def overlap_lambda_max(Phi, y, groups, weights):
    Pc, yc = _centered(Phi, y)
    g = Pc.T @ yc / Phi.shape[0]
    return max(np.linalg.norm(g[c]) / w for c, w in zip(groups, weights))


def collapse_bruteforce(groups, slots, p):
    out = np.zeros(p)
    for cols, vals in zip(groups, slots):
        for c, v in zip(cols, vals):
            out[c] += v
    return out


def proximal_gradient(Phi, y, groups, weights, lam, iters=100_000, tol=1e-16):
    """FISTA with adaptive restart on the duplicated slot vector."""
    n = Phi.shape[0]
    Pc, yc = _centered(Phi, y)
    A = np.hstack([Pc[:, c] for c in groups])
    offsets = np.cumsum([0] + [len(c) for c in groups])
    L = np.linalg.eigvalsh(A.T @ A / n)[-1]
    step = 1.0 / L

    def prox(z):
        out = z.copy()
        for j, w in enumerate(weights):
            s = slice(offsets[j], offsets[j + 1])
            nz = np.linalg.norm(z[s])
            out[s] = 0.0 if nz <= step * lam * w else z[s] * (1.0 - step * lam * w / nz)
        return out

    def obj(z):
        r = yc - A @ z
        pen = sum(w * np.linalg.norm(z[offsets[j]:offsets[j + 1]]) for j, w in enumerate(weights))
        return 0.5 * float(r @ r) / n + lam * pen

    z = np.zeros(A.shape[1])
    v = z.copy()
    t = 1.0
    f_old = obj(z)
    restarted = False
    stall = 0
    for _ in range(iters):
        grad = -A.T @ (yc - A @ v) / n
        z_new = prox(v - step * grad)
        f_new = obj(z_new)
        if f_new > f_old:
            if restarted:
                # a plain proximal step from z cannot descend: converged to rounding
                break
            v = z.copy()
            t = 1.0
            restarted = True
            continue
        restarted = False
        stall = stall + 1 if f_old - f_new <= tol * max(1.0, abs(f_new)) else 0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = z_new + ((t - 1.0) / t_new) * (z_new - z)
        z, t, f_old = z_new, t_new, f_new
        if stall >= 100:
            break
    slots = [z[offsets[j]:offsets[j + 1]].copy() for j in range(len(groups))]
    return slots, f_old


# -- Wendland profile by exact symbolic recursion -------------------------------

def wendland_symbolic(m, k):
    """Normalized profile as a sympy expression in ``t`` on [0, 1]."""
    t, s = sp.symbols("t s", nonnegative=True)
    ell = m // 2 + k + 1
    f = (1 - t) ** ell
    for _ in range(k):
        f = sp.integrate((s * f.subs(t, s)), (s, t, 1))
    f = sp.expand(f)
    return t, sp.simplify(f / f.subs(t, 0))


# -- heredity by brute force -----------------------------------------------------

def all_pairs(d, d_max, r_max):
    """Every (u, r) of a bounded lattice as plain tuples."""
    from itertools import combinations

    out = []
    for size in range(1, d_max + 1):
        for u in combinations(range(1, d + 1), size):
            for r in range(1, r_max + 1):
                out.append((u, r))
    return out


def closed_bruteforce(pairs):
    """Strong heredity by definition: every (v, s), v ⊆ u nonempty, s ≤ r, is present."""
    from itertools import combinations

    S = set(pairs)
    for u, r in S:
        for size in range(1, len(u) + 1):
            for v in combinations(u, size):
                for s in range(1, r + 1):
                    if (v, s) not in S:
                        return False
    return True


# -- l1-penalized quadratic --------------------------------------------------------

def lasso_quadratic_fista(M, h, lam, iters=200_000, tol=1e-15):
    """Minimize ``w'Mw - 2h'w + lam ||w||_1`` by FISTA with restart."""
    L = 2.0 * max(np.linalg.eigvalsh(M)[-1], 1e-300)
    step = 1.0 / L

    def obj(w):
        return float(w @ M @ w - 2.0 * h @ w + lam * np.abs(w).sum())

    def prox(z):
        return np.sign(z) * np.maximum(np.abs(z) - step * lam, 0.0)

    w = np.zeros(h.shape[0])
    v = w.copy()
    t = 1.0
    f_old = obj(w)
    stall = 0
    for _ in range(iters):
        w_new = prox(v - step * 2.0 * (M @ v - h))
        f_new = obj(w_new)
        if f_new > f_old:
            v, t = w.copy(), 1.0
            w_new = prox(w - step * 2.0 * (M @ w - h))
            f_new = obj(w_new)
            if f_new > f_old:
                break
        stall = stall + 1 if f_old - f_new <= tol * max(1.0, abs(f_new)) else 0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t, f_old = w_new, t_new, f_new
        if stall >= 100:
            break
    return w, f_old
