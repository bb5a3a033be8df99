"""Coordinate-descent lasso solver tests.

The oracle for the unpenalized case is numpy's least squares on the
design augmented with an intercept column. Penalized solutions are
checked through their KKT conditions instead of against a second solver.
"""

import numpy as np
import pytest

from driftmf import lasso
from driftmf.lasso import LassoProblem, solve, solve_multi, soft_threshold


def ols_oracle(X, y):
    """Least squares with unpenalized intercept, via lstsq."""
    Xa = np.column_stack([np.ones(len(y)), X])
    beta, *_ = np.linalg.lstsq(Xa, y, rcond=None)
    return beta[1:], beta[0]


def random_problem(rng, n, p, lam):
    X = rng.standard_normal((n, p))
    w = rng.standard_normal(p)
    y = X @ w + 0.1 * rng.standard_normal(n)
    return LassoProblem(X=X, y=y, lam=lam)


def test_soft_threshold_values():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(2.0, 0.0) == 2.0


def test_large_lambda_kills_all_coefficients():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    # at w=0 the pull on coordinate k is |X_k . (y - mean(y))| / n
    r0 = y - y.mean()
    kill = np.max(np.abs(X.T @ r0)) / len(y)
    sol = solve(LassoProblem(X=X, y=y, lam=kill * 1.01))
    assert np.all(sol.coef == 0.0)
    assert sol.intercept == pytest.approx(y.mean(), abs=1e-12)


def test_unpenalized_matches_least_squares_on_6x3():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        prob = random_problem(rng, 6, 3, 0.0)
        sol = solve(prob)
        w_ref, b_ref = ols_oracle(prob.X, prob.y)
        assert sol.converged
        np.testing.assert_allclose(sol.coef, w_ref, atol=1e-4)
        assert sol.intercept == pytest.approx(b_ref, abs=1e-4)


def test_single_feature_matches_closed_form():
    # three observations, hand-checkable
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([1.0, 2.0, 4.0])
    lam = 0.1
    sol = solve(LassoProblem(X=X, y=y, lam=lam, tol=1e-12))
    # centered closed form: w = S(x_c . y_c / n, lam) / (x_c . x_c / n)
    xc = X[:, 0] - X[:, 0].mean()
    yc = y - y.mean()
    n = 3
    w_ref = soft_threshold(float(xc @ yc) / n, lam) / (float(xc @ xc) / n)
    b_ref = y.mean() - w_ref * X[:, 0].mean()
    assert sol.coef[0] == pytest.approx(w_ref, abs=1e-8)
    assert sol.intercept == pytest.approx(b_ref, abs=1e-8)


def test_kkt_conditions_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(5, 21))
        p = int(rng.integers(1, 6))
        lam = float(rng.uniform(0.01, 1.0))
        prob = random_problem(rng, n, p, lam)
        sol = solve(prob)
        assert lasso.kkt_violation(prob.X, prob.y, sol.coef, sol.intercept, prob.lam) <= 10 * prob.tol


def test_objective_non_increasing_in_sweep_budget():
    rng = np.random.default_rng(3)
    prob = random_problem(rng, 30, 8, 0.05)
    objs = []
    for sweeps in (1, 2, 4, 8, 32, 128):
        capped = LassoProblem(X=prob.X, y=prob.y, lam=prob.lam, max_sweeps=sweeps)
        s_ = solve(capped)
        objs.append(lasso.objective(capped.X, capped.y, s_.coef, s_.intercept, capped.lam))
    for a, b in zip(objs, objs[1:]):
        assert b <= a + 1e-12


def test_l1_norm_shrinks_as_lambda_grows():
    rng = np.random.default_rng(11)
    prob = random_problem(rng, 40, 6, 0.0)
    lams = [0.0, 0.01, 0.05, 0.2, 1.0, 5.0]
    norms = []
    nnz = []
    for lam in lams:
        sol = solve(LassoProblem(X=prob.X, y=prob.y, lam=lam))
        norms.append(np.abs(sol.coef).sum())
        nnz.append(int(np.count_nonzero(sol.coef)))
    for a, b in zip(norms, norms[1:]):
        assert b <= a + 1e-10
    for a, b in zip(nnz, nnz[1:]):
        assert b <= a


def test_constant_column_gets_zero_coefficient():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((10, 3))
    X[:, 1] = 2.5
    y = rng.standard_normal(10)
    sol = solve(LassoProblem(X=X, y=y, lam=0.01))
    assert sol.coef[1] == 0.0
    assert np.all(np.isfinite(sol.coef))


def test_sweep_cap_reports_non_convergence():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((50, 10))
    # strongly correlated columns slow the cyclic updates down
    X[:, 1] = X[:, 0] + 1e-3 * rng.standard_normal(50)
    y = X @ rng.standard_normal(10) + rng.standard_normal(50)
    sol = solve(LassoProblem(X=X, y=y, lam=1e-6, max_sweeps=1))
    assert not sol.converged
    assert sol.sweeps_used == 1
    assert np.all(np.isfinite(sol.coef))


def test_solve_multi_matches_per_row_solve():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((12, 4))
    Y = rng.standard_normal((3, 12))
    W, b, sweeps, conv = solve_multi(X, Y, lam=0.05)
    assert W.shape == (3, 4)
    for k in range(3):
        single = solve(LassoProblem(X=X, y=Y[k], lam=0.05))
        np.testing.assert_allclose(W[k], single.coef, atol=1e-12)
        assert b[k] == pytest.approx(single.intercept, abs=1e-12)
        assert conv[k] == single.converged


def test_problem_validation():
    X = np.ones((3, 2))
    y = np.ones(3)
    with pytest.raises(ValueError):
        LassoProblem(X=X, y=y, lam=-0.1)
    with pytest.raises(ValueError):
        LassoProblem(X=X, y=np.ones(4), lam=0.0)
    with pytest.raises(ValueError):
        LassoProblem(X=np.array([[np.nan, 1.0]]), y=np.ones(1), lam=0.0)
