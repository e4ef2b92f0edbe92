"""Pure NumPy/Python implementations of the hot kernels.

These mirror ``_core.pyx`` function for function and are used whenever the
compiled extension is unavailable (or ``MRFA_BACKEND=python`` is set).
"""

import math

import numpy as np

_CHUNK = 64


def wendland_block(xu, centers, inv_bw, q, expo, zero_tol):
    """Evaluate ``(1 - r)^expo * q(r)`` for every (row, center) pair.

    ``r = ||xu[i] - centers[j]|| * inv_bw``; ``q`` holds polynomial
    coefficients in increasing degree. Values below ``zero_tol`` are zeroed.
    """
    xu = np.ascontiguousarray(xu, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    n = xu.shape[0]
    a = centers.shape[0]
    out = np.zeros((n, a), dtype=np.float64)
    qr = np.asarray(q, dtype=np.float64)[::-1]
    for start in range(0, a, _CHUNK):
        c = centers[start:start + _CHUNK]
        r2 = np.zeros((n, c.shape[0]))
        for k in range(xu.shape[1]):
            d = xu[:, k, None] - c[None, :, k]
            r2 += d * d
        r = np.sqrt(r2) * inv_bw
        inside = r < 1.0
        rr = np.where(inside, r, 1.0)
        poly = np.zeros_like(rr)
        for coef in qr:
            poly = poly * rr + coef
        s = 1.0 - rr
        val = poly
        for _ in range(expo):
            val = val * s
        val = np.where(inside, val, 0.0)
        val[val < zero_tol] = 0.0
        out[:, start:start + _CHUNK] = val
    return out


def secular_root(e, c2, mu, tol=1e-14, max_iter=200):
    """Positive root ``t`` of ``sum(c2 / (e t + mu)^2) = 1``.

    Requires ``sum(c2) > mu**2`` (so the root exists) and ``e >= 0``.
    Safeguarded Newton on ``1/sqrt(F(t)) - 1``, which is close to linear.
    """
    e = np.asarray(e, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    cnorm = math.sqrt(float(c2.sum()))
    emax = float(e.max()) if e.size else 0.0
    emin = float(e.min()) if e.size else 0.0
    lo = (cnorm - mu) / emax if emax > 0 else 0.0
    hi = (cnorm - mu) / emin if emin > 0 else math.inf

    def evaluate(t):
        den = e * t + mu
        f = float(np.sum(c2 / (den * den)))
        fp = float(-2.0 * np.sum(c2 * e / (den * den * den)))
        return f, fp

    if not math.isfinite(hi):
        hi = max(lo, 1.0)
        while evaluate(hi)[0] > 1.0:
            hi *= 2.0
            if hi > 1e300:
                break
    t = lo
    for _ in range(max_iter):
        f, fp = evaluate(t)
        if abs(f - 1.0) <= tol:
            return t
        if f > 1.0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        sf = math.sqrt(f)
        phi = 1.0 / sf - 1.0
        dphi = -0.5 * fp / (f * sf)
        step_ok = dphi > 0.0
        if step_ok:
            t_new = t - phi / dphi
            step_ok = lo < t_new < hi
        if not step_ok:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)):
            return t_new
        t = t_new
    return t


def lasso_cd(M, h, lam, w, max_sweeps, tol):
    """Coordinate descent for ``w'Mw - 2h'w + lam*||w||_1`` (in place).

    ``M`` must be symmetric; its rows are used as columns.

    Returns ``(sweeps, max_abs_change_last_sweep)``.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    q = w.shape[0]
    mw = M @ w
    half = 0.5 * lam
    delta = 0.0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        delta = 0.0
        for j in range(q):
            mjj = M[j, j]
            if mjj <= 0.0:
                continue
            old = w[j]
            z = h[j] - mw[j] + mjj * old
            if z > half:
                new = (z - half) / mjj
            elif z < -half:
                new = (z + half) / mjj
            else:
                new = 0.0
            if new != old:
                d = new - old
                mw += d * M[j]
                w[j] = new
                if abs(d) > delta:
                    delta = abs(d)
        if delta <= tol:
            break
    return sweeps, delta
