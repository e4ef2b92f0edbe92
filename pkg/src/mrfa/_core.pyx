# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; ``_fallback.py`` holds the reference Python twins."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def wendland_block(const double[:, ::1] xu, const double[:, ::1] centers,
                   double inv_bw, const double[::1] q, int expo,
                   double zero_tol):
    cdef Py_ssize_t n = xu.shape[0]
    cdef Py_ssize_t a = centers.shape[0]
    cdef Py_ssize_t m = xu.shape[1]
    cdef Py_ssize_t nq = q.shape[0]
    out_arr = np.zeros((n, a), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double r2, d, r, s, poly, val
    cdef int p
    with nogil:
        for i in range(n):
            for j in range(a):
                r2 = 0.0
                for k in range(m):
                    d = xu[i, k] - centers[j, k]
                    r2 = r2 + d * d
                r = sqrt(r2) * inv_bw
                if r >= 1.0:
                    continue
                poly = 0.0
                for k in range(nq - 1, -1, -1):
                    poly = poly * r + q[k]
                s = 1.0 - r
                val = poly
                for p in range(expo):
                    val = val * s
                if val >= zero_tol:
                    out[i, j] = val
    return out_arr


cdef inline void _secular_eval(const double[::1] e, const double[::1] c2,
                               double mu, double t, double* f,
                               double* fp) noexcept nogil:
    cdef Py_ssize_t i
    cdef double den, acc = 0.0, accp = 0.0
    for i in range(e.shape[0]):
        den = e[i] * t + mu
        acc = acc + c2[i] / (den * den)
        accp = accp + c2[i] * e[i] / (den * den * den)
    f[0] = acc
    fp[0] = -2.0 * accp


def secular_root(const double[::1] e, const double[::1] c2, double mu,
                 double tol=1e-14, int max_iter=200):
    cdef Py_ssize_t i, n = e.shape[0]
    cdef double csum = 0.0, emax = 0.0, emin = INFINITY
    for i in range(n):
        csum += c2[i]
        if e[i] > emax:
            emax = e[i]
        if e[i] < emin:
            emin = e[i]
    if n == 0:
        emin = 0.0
    cdef double cnorm = sqrt(csum)
    cdef double lo = (cnorm - mu) / emax if emax > 0 else 0.0
    cdef double hi = (cnorm - mu) / emin if emin > 0 else INFINITY
    cdef double f, fp, t, t_new, sf, phi, dphi
    cdef bint step_ok
    cdef int it
    if hi == INFINITY:
        hi = lo if lo > 1.0 else 1.0
        _secular_eval(e, c2, mu, hi, &f, &fp)
        while f > 1.0 and hi < 1e300:
            hi *= 2.0
            _secular_eval(e, c2, mu, hi, &f, &fp)
    t = lo
    for it in range(max_iter):
        _secular_eval(e, c2, mu, t, &f, &fp)
        if fabs(f - 1.0) <= tol:
            return t
        if f > 1.0:
            if t > lo:
                lo = t
        else:
            if t < hi:
                hi = t
        sf = sqrt(f)
        phi = 1.0 / sf - 1.0
        dphi = -0.5 * fp / (f * sf)
        step_ok = dphi > 0.0
        if step_ok:
            t_new = t - phi / dphi
            step_ok = lo < t_new < hi
        if not step_ok:
            t_new = 0.5 * (lo + hi)
        if fabs(t_new - t) <= 1e-15 * (fabs(t) if fabs(t) > 1.0 else 1.0):
            return t_new
        t = t_new
    return t


def lasso_cd(const double[:, ::1] M, const double[::1] h, double lam,
             double[::1] w, int max_sweeps, double tol):
    cdef Py_ssize_t q = w.shape[0]
    mw_arr = np.asarray(M) @ np.asarray(w)
    cdef double[::1] mw = mw_arr
    cdef double half = 0.5 * lam
    cdef double delta = 0.0, mjj, old, z, new, d
    cdef Py_ssize_t j, k
    cdef int sweeps = 0
    with nogil:
        while sweeps < max_sweeps:
            sweeps += 1
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
                    for k in range(q):
                        mw[k] = mw[k] + d * M[j, k]
                    w[j] = new
                    if fabs(d) > delta:
                        delta = fabs(d)
            if delta <= tol:
                break
    return sweeps, delta
