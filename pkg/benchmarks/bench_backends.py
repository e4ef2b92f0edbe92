"""Time the compiled kernels against the pure-Python fallback.

Run after building the extension::

    python3 benchmarks/bench_backends.py [--repeat 5]

Each kernel is timed on identical inputs through both implementations and
the outputs are compared, so a mismatch shows up next to the speedup.
"""

import argparse
import math
import time

import numpy as np

from mrfa import _fallback
from mrfa.kernels import WendlandKernel

try:
    from mrfa import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def case_wendland(rng):
    kern = WendlandKernel(2, 2)
    xu = rng.random((5000, 2))
    centers = rng.random((400, 2))
    args = (xu, centers, 1.0 / 0.3, kern.q, kern.exponent, 1e-12)
    return "wendland_block 5000x400, |u|=2", lambda impl: impl.wendland_block(*args)


def case_secular(rng):
    e = rng.random(200) + 1e-3
    c2 = rng.random(200)
    mu = 0.5 * math.sqrt(c2.sum())

    def run(impl):
        return np.array([impl.secular_root(e, c2, mu) for _ in range(2000)])

    return "secular_root x2000, block size 200", run


def case_lasso(rng):
    A = rng.standard_normal((300, 120))
    M = A.T @ A / 300
    h = A.T @ rng.standard_normal(300) / 300
    lam = 0.05 * 2.0 * np.max(np.abs(h))

    def run(impl):
        w = np.zeros(120)
        impl.lasso_cd(M, h, lam, w, 2000, 1e-12)
        return w

    return "lasso_cd 120 coordinates", run


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _core is None:
        print("compiled backend not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<38}{'python s':>11}{'cython s':>11}{'speedup':>9}{'max diff':>11}")
    for make in (case_wendland, case_secular, case_lasso):
        label, run = make(rng)
        t_py, out_py = _best(lambda: run(_fallback), args.repeat)
        t_cy, out_cy = _best(lambda: run(_core), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out_py) - np.asarray(out_cy))))
        print(f"{label:<38}{t_py:>11.4f}{t_cy:>11.4f}{t_py / t_cy:>9.1f}{diff:>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
