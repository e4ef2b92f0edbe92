"""The ten acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line that is printed in the terminal
summary, then asserts. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mrfa.bench import FUNCTIONS, eval_function, run_benchmark
from mrfa.cli import main as cli_main
from mrfa.cli import path_report_rows
from mrfa.config import RunConfig
from mrfa.heredity import EffectResolution, is_heredity_closed
from mrfa.inference import intervals, point_interval
from mrfa.kernels import WendlandKernel, wendland_profile
from mrfa.model import FittedModel, dumps, fit, information_criterion
from mrfa.solver import GroupLassoProblem

from bench_oracle import ORACLES, RANGES
from oracles import (
    collapse_bruteforce,
    overlap_lambda_max,
    overlap_objective,
    proximal_gradient,
    random_overlap_instance,
)


def record(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    print(ACCEPTANCE_LINES[number])
    return ok


def toy_mean(x):
    return np.exp(-1.4 * x) * np.cos(3.5 * np.pi * x)


TOY_X = np.linspace(0.0, 1.0, 14)[:, None]
TOY_TEST = np.random.default_rng(123).random((500, 1))


# -- 1 ----------------------------------------------------------------------------

def test_c01_solver_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst_obj = worst_coef = worst_kkt = 0.0
    solver_time = 0.0
    for _ in range(50):
        Phi, y, groups, w = random_overlap_instance(rng)
        t0 = time.perf_counter()
        prob = GroupLassoProblem(y)
        prob.add_columns(Phi)
        for j, (cols, wt) in enumerate(zip(groups, w)):
            prob.add_group(j, cols, wt)
        lmax = prob.lambda_max()
        lam = rng.uniform(0.02, 0.98) * lmax
        bz, _ = prob.fit(lam, kkt_tol=1e-8)
        kkt = prob.kkt_residual(bz, lam)
        solver_time += time.perf_counter() - t0
        assert abs(lmax - overlap_lambda_max(Phi, y, groups, w)) <= 1e-12 * lmax
        slots, f_ref = proximal_gradient(Phi, y, groups, w, lam)
        f = overlap_objective(Phi, y, groups, w, bz.blocks, lam)
        coef = np.max(np.abs(prob.collapse(bz) - collapse_bruteforce(groups, slots, Phi.shape[1])))
        worst_obj = max(worst_obj, abs(f - f_ref) / abs(f_ref))
        worst_coef = max(worst_coef, coef)
        worst_kkt = max(worst_kkt, kkt)
    ok = worst_obj <= 1e-6 and worst_coef <= 1e-4 and worst_kkt <= 1e-4 and solver_time < 30
    record(1, ok, f"50 instances, max objective gap {worst_obj:.2e} (<=1e-6), "
                  f"max coef diff {worst_coef:.2e} (<=1e-4), max KKT {worst_kkt:.2e} (<=1e-4), "
                  f"solver time {solver_time:.2f}s (<30s)")
    assert ok


# -- 2, 3 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sparse10_runs():
    runs = {}
    for n in (1000, 10_000):
        for seed in range(5):
            runs[n, seed] = run_benchmark("sparse10", n, 10_000, seed)
    return runs


def test_c02_heredity_closure(sparse10_runs):
    all_closed = True
    firsts = []
    for seed in range(5):
        path = sparse10_runs[1000, seed].extra["result"].path
        all_closed &= all(is_heredity_closed(pt.active) for pt in path)
        firsts.append(path.entry_order()[0])
    target = EffectResolution((3,), 1)
    misses = sum(g != target for g in firsts)
    ok = all_closed and misses <= 1
    record(2, ok, f"n=1000 x 5 seeds: every path point closed={all_closed}; first group "
                  f"({{3}},1) in {5 - misses}/5 seeds (>=4 required)")
    assert ok


def test_c03_variable_detection(sparse10_runs):
    detect = all(r.variable_detection for r in sparse10_runs.values())
    worst = max(r.rmse for r in sparse10_runs.values())
    slowest = max(r.fit_seconds + r.predict_seconds
                  for (n, _), r in sparse10_runs.items() if n == 10_000)
    ok = detect and worst <= 1e-2 and slowest <= 300
    record(3, ok, f"n=1000,10000 x 5 seeds: effects within {{1,2,3}} in all runs={detect}; "
                  f"max test RMSE {worst:.2e} (<=1e-2); slowest n=10000 run {slowest:.1f}s (<=300s)")
    assert ok


# -- 4, 5 ---------------------------------------------------------------------------

def test_c04_stochastic_ci_calibration():
    truth = toy_mean(TOY_TEST[:, 0])
    covs = []
    for seed in range(10):
        y = toy_mean(TOY_X[:, 0]) + np.random.default_rng(seed).normal(0.0, 0.3, 14)
        res = fit(TOY_X, y, RunConfig(criterion="aic"))
        ci = intervals(res, TOY_TEST, 0.05, "ridge")
        covs.append(100.0 * np.mean((ci.lower <= truth) & (truth <= ci.upper)))
    covs = np.array(covs)
    ok = bool(np.all((covs >= 88) & (covs <= 100)) and 90 <= covs.mean() <= 99)
    record(4, ok, f"AIC, ridge w, 10 noise seeds: per-seed coverage {covs.min():.1f}-"
                  f"{covs.max():.1f}% (in [88,100]), mean {covs.mean():.2f}% (in [90,99])")
    assert ok


@pytest.mark.xfail(strict=True, reason="known shortfall: the corrected intervals over-cover "
                   "(100%); see the decisions ledger for the analysis")
def test_c05_deterministic_ci_apley():
    truth = toy_mean(TOY_TEST[:, 0])
    res = fit(TOY_X, toy_mean(TOY_X[:, 0]), RunConfig())
    ci = intervals(res, TOY_TEST, 0.05, "apley")
    cov = 100.0 * np.mean((ci.lower <= truth) & (truth <= ci.upper))
    cal = ci.details["apley"]
    ok = 90 <= cov <= 99
    record(5, ok, f"noiseless toy, Apley-corrected sigma2={cal.sigma2:.3g} (CV coverage "
                  f"{100 * cal.coverage:.1f}%): test coverage {cov:.1f}% (need [90,99])")
    assert ok


# -- 6 ----------------------------------------------------------------------------

def linear_family(rng, n, theta, star, noise=1.0):
    Phi = np.hstack([np.ones((n, 1)), rng.random((n, len(theta) - 1))])
    y = Phi @ theta + noise * rng.standard_normal(n)
    est = np.linalg.lstsq(Phi, y, rcond=None)[0]
    r = y - Phi @ est
    return point_interval(Phi, y, est, star, float(r @ r) / (n - len(theta)))


def test_c06_monte_carlo_score_calibration():
    rng = np.random.default_rng(6)
    p, reps = 5, 500
    theta = rng.standard_normal(p)
    star = np.concatenate([[1.0], rng.random(p - 1)])
    target = float(star @ theta)
    hits = 0
    for _ in range(reps):
        iv = linear_family(rng, 2000, theta, star)
        hits += iv.lower <= target <= iv.upper
    cov = hits / reps
    band = 3 * math.sqrt(0.95 * 0.05 / reps)
    widths = {}
    for n in (1000, 4000):
        ws = [linear_family(rng, n, theta, star) for _ in range(100)]
        widths[n] = np.mean([iv.upper - iv.lower for iv in ws])
    ratio = widths[4000] / widths[1000]
    ok = abs(cov - 0.95) <= band and 0.4 <= ratio <= 0.6
    record(6, ok, f"n=2000, p=5, 500 reps: coverage {100 * cov:.1f}% (95 +/- {100 * band:.2f}); "
                  f"width ratio n=4000/n=1000 {ratio:.3f} (in [0.4,0.6])")
    assert ok


# -- 7 ----------------------------------------------------------------------------

def test_c07_test_function_fidelity():
    worst = 0.0
    for k, name in enumerate(sorted(ORACLES)):
        rng = np.random.default_rng(k)
        lo, hi = np.array(RANGES[name], dtype=float).T
        X = lo + rng.random((1000, len(lo))) * (hi - lo)
        got = eval_function(name, X)
        want = np.array([ORACLES[name](list(row)) for row in X])
        worst = max(worst, float(np.max(np.abs(got - want) / np.abs(want))))
    spots = (eval_function("sparse10", np.zeros(10)) == 8.0,
             eval_function("gramacy_lee", np.zeros(6)) == math.exp(math.sin(0.432 ** 10)),
             eval_function("bending", [10.0, 1.0, 0.1]) == 4e-3)
    ok = worst <= 1e-10 and all(spots)
    record(7, ok, f"6 functions x 1000 points: max relative error {worst:.2e} (<=1e-10); "
                  f"spot values exact {sum(spots)}/3")
    assert ok


# -- 8 ----------------------------------------------------------------------------

def test_c08_gramacy_lee_selection():
    rmses, timings = {}, {}
    for crit in ("aic", "bic", "cv:10"):
        res = run_benchmark("gramacy_lee", 1000, 10_000, seed=0, config=RunConfig(criterion=crit))
        rmses[crit] = res.rmse
        if crit in ("aic", "bic"):
            path = res.extra["result"].path
            t0 = time.perf_counter()
            information_criterion(path, crit)
            timings[crit] = time.perf_counter() - t0
    ok = all(v <= 0.25 for v in rmses.values()) and all(t < 2.0 for t in timings.values())
    record(8, ok, "n=1000 (200 unique x 5): test RMSE "
                  + ", ".join(f"{k.upper()} {v:.3f}" for k, v in rmses.items())
                  + " (<=0.25); selection time "
                  + ", ".join(f"{k.upper()} {1e3 * v:.2f}ms" for k, v in timings.items())
                  + " (<2s)")
    assert ok


# -- 9 ----------------------------------------------------------------------------

def test_c09_kernel_properties():
    checks = []
    r = np.linspace(0.0, 1.5, 3001)
    for m in range(1, 6):
        kern = WendlandKernel(2, m)
        v = kern.profile(r)
        rng = np.random.default_rng(m)
        P = rng.random((80, m))
        D = np.linalg.norm(P[:, None] - P[None, :], axis=2) / 0.5
        eig = np.linalg.eigvalsh(kern.profile(D))[0]
        checks.append((wendland_profile(0.0, m, 2) == 1.0,
                       bool(np.all(v[r >= 1.0] == 0.0) and np.all(v[r < 1.0] > 0.0)),
                       bool(np.all(np.diff(v) <= 0.0)),
                       eig >= -1e-10))
    ok = all(all(c) for c in checks)
    record(9, ok, "m=1..5, k=2: normalization, compact support, monotonicity, Gram PSD "
                  f"passed {sum(all(c) for c in checks)}/5")
    assert ok


# -- 10 ---------------------------------------------------------------------------

def test_c10_determinism_and_persistence(tmp_path):
    fn = FUNCTIONS["gramacy_lee"]
    rng = np.random.default_rng(10)
    X = np.repeat(rng.random((60, 6)), 5, axis=0)
    y = fn(X) + rng.normal(0, 0.05, len(X))
    cfg = RunConfig(criterion="cv:5", seed=3, d_max=3, r_max=3)
    a, b = fit(X, y, cfg), fit(X, y, cfg)
    same_report = path_report_rows(a) == path_report_rows(b)
    same_model = dumps(a.model.to_dict()) == dumps(b.model.to_dict())
    # the CLI artifacts, byte for byte
    train = tmp_path / "train.csv"
    header = ",".join(fn.input_names) + ",y\n"
    train.write_text(header + "".join(",".join(repr(float(v)) for v in row) + "\n"
                                      for row in np.column_stack([X, y])))
    blobs = []
    for _ in range(2):
        out = tmp_path / "m.json"
        assert cli_main(["fit", str(train), "--response", "y", "--criterion", "cv:5",
                         "--seed", "3", "--dmax", "3", "--rmax", "3", "--out", str(out)]) == 0
        blobs.append((out.read_bytes(), (tmp_path / "m_path.csv").read_bytes()))
    same_files = blobs[0] == blobs[1]
    a.model.save(tmp_path / "saved.json")
    back = FittedModel.load(tmp_path / "saved.json")
    lo, hi = X.min(axis=0), X.max(axis=0)
    Xt = lo + rng.random((1000, 6)) * (hi - lo)
    same_pred = np.array_equal(back.predict(Xt), a.model.predict(Xt))
    ok = same_report and same_model and same_files and same_pred
    record(10, ok, f"identical path reports={same_report}, model files={same_model}, CLI "
                   f"artifacts byte-identical={same_files}; save/load predictions bitwise "
                   f"equal={same_pred}")
    assert ok
