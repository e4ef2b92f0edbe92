import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mrfa.errors import ConvergenceError, NumericError
from mrfa.heredity import EffectResolution, is_heredity_closed
from mrfa.solver import (
    DuplicatedCoefficients,
    GroupLassoProblem,
    SolverConfig,
    collapse,
    fit_at_lambda,
    kkt_residual,
    lambda_max,
    solve_path,
)

from oracles import (
    collapse_bruteforce,
    overlap_lambda_max,
    overlap_objective,
    proximal_gradient,
    random_overlap_instance,
)


def make_problem(Phi, y, groups, weights, standardize=False):
    prob = GroupLassoProblem(y, standardize=standardize)
    prob.add_columns(Phi)
    for j, (cols, w) in enumerate(zip(groups, weights)):
        prob.add_group(j, cols, w)
    return prob


def orthonormal_design(rng, n, p):
    """Columns with zero mean and ``Phi' Phi / n = I``."""
    A = rng.standard_normal((n, p))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q * math.sqrt(n)


# -- oracle agreement ------------------------------------------------------------

@pytest.mark.parametrize("seed", range(8))
def test_matches_proximal_gradient_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    Phi, y, groups, w = random_overlap_instance(rng)
    prob = make_problem(Phi, y, groups, w)
    lam = rng.uniform(0.02, 0.98) * prob.lambda_max()
    bz, info = prob.fit(lam, kkt_tol=1e-8)
    slots, f_ref = proximal_gradient(Phi, y, groups, w, lam)
    f = overlap_objective(Phi, y, groups, w, bz.blocks, lam)
    assert abs(f - f_ref) <= 1e-6 * abs(f_ref)
    assert_allclose(prob.collapse(bz), collapse_bruteforce(groups, slots, Phi.shape[1]), atol=1e-4)
    assert prob.kkt_residual(bz, lam) <= 1e-8
    assert_allclose(prob.objective(bz, lam), f, rtol=1e-12)


def test_lambda_max_matches_oracle_and_zeroes_the_fit():
    rng = np.random.default_rng(7)
    for _ in range(10):
        Phi, y, groups, w = random_overlap_instance(rng)
        prob = make_problem(Phi, y, groups, w)
        lmax = lambda_max(prob)
        assert_allclose(lmax, overlap_lambda_max(Phi, y, groups, w), rtol=1e-12)
        bz, _ = fit_at_lambda(prob, 1.001 * lmax)
        assert not bz.nonzero_keys()
        assert_allclose(prob.intercept(prob.collapse(bz)), y.mean())
        bz, _ = fit_at_lambda(prob, 0.9 * lmax)
        assert bz.nonzero_keys()


def test_lambda_max_examples():
    rng = np.random.default_rng(1)
    Phi = rng.random((20, 3))
    assert lambda_max(make_problem(Phi, np.full(20, 2.5), [np.arange(3)], [1.0])) == 0.0
    n, N = 40, 4
    Q = orthonormal_design(rng, n, N)
    y = rng.standard_normal(n)
    prob = make_problem(Q, y, [np.arange(N)], [math.sqrt(N)])
    yc = y - y.mean()
    assert_allclose(lambda_max(prob), np.linalg.norm(Q.T @ yc) / (n * math.sqrt(N)), rtol=1e-12)
    with pytest.raises(ValueError):
        GroupLassoProblem(y).lambda_max()


def test_least_squares_at_zero_lambda():
    rng = np.random.default_rng(2)
    n = 12
    Phi = rng.random((n, n - 1))
    y = rng.standard_normal(n)
    prob = make_problem(Phi, y, [np.array([j]) for j in range(n - 1)], np.ones(n - 1))
    bz, _ = prob.fit(0.0, kkt_tol=1e-12)
    A = np.hstack([np.ones((n, 1)), Phi])
    coef = np.linalg.solve(A, y)
    assert_allclose(prob.collapse(bz), coef[1:], atol=1e-8)
    assert_allclose(prob.intercept(prob.collapse(bz)), coef[0], atol=1e-8)


def test_orthonormal_block_soft_threshold():
    rng = np.random.default_rng(3)
    n, N = 60, 5
    Q = orthonormal_design(rng, n, N)
    y = Q @ rng.standard_normal(N) + 0.3 * rng.standard_normal(n)
    prob = make_problem(Q, y, [np.arange(N)], [math.sqrt(N)])
    b = Q.T @ (y - y.mean()) / n
    for frac in (0.1, 0.5, 0.9, 1.2):
        lam = frac * np.linalg.norm(b) / math.sqrt(N)
        bz, _ = prob.fit(lam, kkt_tol=1e-12)
        expected = max(0.0, 1.0 - lam * math.sqrt(N) / np.linalg.norm(b)) * b
        assert_allclose(prob.collapse(bz), expected, atol=1e-12)


def test_standardized_mode_equals_plain_mode_on_orthonormal_groups():
    # with Phi_J' Phi_J / n = I the standardized norm is the plain norm
    rng = np.random.default_rng(4)
    n = 80
    Q = orthonormal_design(rng, n, 6)
    y = Q @ rng.standard_normal(6) + rng.standard_normal(n)
    groups = [np.arange(3), np.arange(3, 6)]
    w = [math.sqrt(3)] * 2
    plain = make_problem(Q, y, groups, w)
    std = make_problem(Q, y, groups, w, standardize=True)
    assert_allclose(std.lambda_max(), plain.lambda_max(), rtol=1e-10)
    lam = 0.4 * plain.lambda_max()
    a, _ = plain.fit(lam, kkt_tol=1e-11)
    b, _ = std.fit(lam, kkt_tol=1e-11)
    assert_allclose(std.collapse(b), plain.collapse(a), atol=1e-9)


def test_standardized_mode_invariant_to_within_group_reparametrization():
    # the standardized penalty only sees the span of each group's columns
    rng = np.random.default_rng(5)
    n = 70
    Phi = rng.random((n, 4))
    y = Phi @ rng.standard_normal(4) + 0.1 * rng.standard_normal(n)
    T = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    groups, w = [np.arange(4)], [2.0]
    p1 = make_problem(Phi, y, groups, w, standardize=True)
    p2 = make_problem(Phi @ T, y, groups, w, standardize=True)
    lam = 0.3 * p1.lambda_max()
    assert_allclose(p2.lambda_max(), p1.lambda_max(), rtol=1e-9)
    a, _ = p1.fit(lam, kkt_tol=1e-11)
    b, _ = p2.fit(lam, kkt_tol=1e-11)
    assert_allclose(p2.fitted(p2.collapse(b)), p1.fitted(p1.collapse(a)), atol=1e-8)


def test_objective_monotone_and_warm_start_never_worse():
    rng = np.random.default_rng(6)
    for _ in range(10):
        Phi, y, groups, w = random_overlap_instance(rng)
        prob = make_problem(Phi, y, groups, w)
        lam = 0.3 * prob.lambda_max()
        bz, info = prob.fit(lam)
        assert info.monotone
        assert np.all(np.diff(info.objective_trace) <= 1e-12 * max(1.0, abs(info.objective_trace[0])))
        start = prob.objective(bz, 0.25 * prob.lambda_max())
        bz2, _ = prob.fit(0.25 * prob.lambda_max(), warm_start=bz)
        assert prob.objective(bz2, 0.25 * prob.lambda_max()) <= start + 1e-14


def test_kkt_residual_examples():
    rng = np.random.default_rng(8)
    Phi, y, groups, w = random_overlap_instance(rng)
    prob = make_problem(Phi, y, groups, w)
    lam = 0.5 * prob.lambda_max()
    assert kkt_residual(prob, prob.zeros(), lam) > 0
    bz, _ = prob.fit(lam, kkt_tol=1e-10)
    base = kkt_residual(prob, bz, lam)
    assert base <= 1e-10
    j = int(np.argmax(bz.norms()))
    bumped = bz.copy()
    bumped.blocks[j] = bumped.blocks[j] + 0.1
    assert kkt_residual(prob, bumped, lam) > base


def test_kkt_residual_matches_definition():
    rng = np.random.default_rng(9)
    Phi, y, groups, w = random_overlap_instance(rng)
    prob = make_problem(Phi, y, groups, w)
    lam = 0.4 * prob.lambda_max()
    bz, _ = prob.fit(lam, kkt_tol=1e-3)
    Pc = Phi - Phi.mean(axis=0)
    r = (y - y.mean()) - Pc @ prob.collapse(bz)
    worst = 0.0
    for cols, wt, b in zip(groups, w, bz.blocks):
        gj = Pc[:, cols].T @ r / len(y)
        nb = np.linalg.norm(b)
        v = np.max(np.abs(gj - lam * wt * b / nb)) if nb > 0 else max(0.0, np.linalg.norm(gj) - lam * wt)
        worst = max(worst, v)
    assert_allclose(prob.kkt_residual(bz, lam), worst, rtol=1e-9, atol=1e-14)


def test_nonconvergence_reports_residual():
    rng = np.random.default_rng(10)
    Phi, y, groups, w = random_overlap_instance(rng)
    prob = make_problem(Phi, y, groups, w)
    with pytest.raises(ConvergenceError) as err:
        prob.fit(0.01 * prob.lambda_max(), kkt_tol=1e-300, max_sweeps=2)
    assert err.value.residual > 0


def test_rejects_non_finite_inputs():
    with pytest.raises(NumericError):
        GroupLassoProblem(np.array([1.0, np.nan]))
    prob = GroupLassoProblem(np.zeros(3))
    with pytest.raises(NumericError):
        prob.add_columns(np.array([[1.0], [np.inf], [0.0]]))
    with pytest.raises(ValueError):
        prob.fit(-1.0)


# -- collapse ------------------------------------------------------------------

def test_collapse_examples():
    bz = DuplicatedCoefficients(["a", "b"], [np.array([0, 1]), np.array([1])],
                                [np.array([0.0, 0.3]), np.array([0.2])])
    assert_allclose(collapse(bz), [0.0, 0.5])
    zero = DuplicatedCoefficients(["a"], [np.array([0, 2])], [np.zeros(2)])
    assert_array_equal(collapse(zero, 4), np.zeros(4))


def test_collapse_against_bruteforce():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = int(rng.integers(3, 30))
        members = [np.sort(rng.choice(p, size=int(rng.integers(1, p + 1)), replace=False))
                   for _ in range(int(rng.integers(1, 6)))]
        blocks = [rng.standard_normal(len(m)) for m in members]
        bz = DuplicatedCoefficients(list(range(len(members))), members, blocks)
        assert_allclose(collapse(bz, p), collapse_bruteforce(members, blocks, p), rtol=1e-15)


# -- path ------------------------------------------------------------------------

def additive_data(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 4))
    y = np.sin(2 * np.pi * X[:, 0]) + (X[:, 1] - 0.5) ** 2 + X[:, 0] * X[:, 1]
    return X, y


@pytest.fixture(scope="module")
def small_path():
    X, y = additive_data(150, 0)
    return X, y, solve_path(X, y, SolverConfig(d_max=2, r_max=3))


def test_path_properties(small_path):
    X, y, path = small_path
    lams = path.lambdas
    assert np.all(np.diff(lams) < 0)
    assert_allclose(lams[0], path.lambda_max)
    rss = np.array([pt.rss for pt in path])
    assert np.all(np.diff(rss) <= 1e-9 * rss[0])
    assert path.support_bound_ok
    for pt in path:
        assert is_heredity_closed(pt.active)
        assert set(pt.nonzero_groups) <= set(pt.active)
        assert pt.s == np.count_nonzero(pt.beta)
        resid = y - pt.intercept - path.problem.phi[:, :len(pt.beta)] @ pt.beta
        assert_allclose(float(resid @ resid), pt.rss, rtol=1e-10)
    assert path[0].s == 0
    assert path[0].active == ()
    # the signal lives in inputs 1 and 2 only
    first = path.entry_order()[0]
    assert first.u in ((1,), (2,)) and first.r == 1
    assert path.stop_reason


def test_path_candidates_grow_from_main_effects(small_path):
    _, _, path = small_path
    assert set(path[0].candidates) == {EffectResolution((j,), 1) for j in range(1, 5)}
    for a, b in zip(path.points, path.points[1:]):
        assert set(a.candidates) <= set(b.candidates)
        assert b.n_columns >= a.n_columns


def test_path_is_deterministic(small_path):
    X, y, path = small_path
    again = solve_path(X, y, SolverConfig(d_max=2, r_max=3))
    assert len(again) == len(path)
    for a, b in zip(path, again):
        assert a.lam == b.lam and a.rss == b.rss and a.active == b.active
        assert_array_equal(a.beta, b.beta)


def test_pure_noise_starts_empty():
    rng = np.random.default_rng(12)
    X = rng.random((200, 3))
    y = rng.standard_normal(200)
    cfg = SolverConfig(d_max=1, r_max=2, max_steps=3)
    path = solve_path(X, y, cfg)
    assert path[0].active == ()
    assert len(path) == 3 and path.stop_reason == "max_steps"


def test_max_terms_stops_the_path():
    X, y = additive_data(100, 1)
    path = solve_path(X, y, SolverConfig(d_max=1, r_max=2, max_terms=5))
    assert path.stop_reason == "max_terms"
    assert path[-1].s >= 5 and all(pt.s < 5 for pt in path.points[:-1])


def test_explicit_grid_is_followed():
    X, y = additive_data(80, 2)
    full = solve_path(X, y, SolverConfig(d_max=1, r_max=2, max_steps=10))
    again = solve_path(X, y, SolverConfig(d_max=1, r_max=2), lambdas=full.lambdas)
    assert_array_equal(again.lambdas, full.lambdas)
    with pytest.raises(ValueError):
        solve_path(X, y, lambdas=[1.0, 2.0])


def test_path_rejects_unscaled_inputs():
    X, y = additive_data(20, 3)
    with pytest.raises(ValueError):
        solve_path(X * 2.0, y)
