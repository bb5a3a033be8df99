"""L1-regularized least squares by cyclic coordinate descent.

Minimizes

    (1 / (2 n)) * sum_t (y_t - w . x_t - b)^2 + lam * ||w||_1

over the coefficient vector ``w`` and the unpenalized intercept ``b``.
Coordinates are updated in cyclic order with soft-thresholding; the
intercept is re-fit to the mean residual after every sweep.  Columns are
used as-is (no standardization), so ``lam`` acts on the natural scale of
the regressors.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 10_000

# Columns whose variance falls below this (relative to their mean square)
# are treated as constant: their coefficient is pinned to zero and the
# intercept absorbs them.
_CONST_COL_RTOL = 1e-12


@dataclass
class LassoProblem:
    """One L1-regularized least-squares instance.

    Attributes:
        X: (n, p) design matrix, rows are observations.
        y: (n,) response vector.
        lam: L1 penalty weight, >= 0.
        tol: stop once no coefficient moves more than this in a sweep.
        max_sweeps: hard cap on cyclic sweeps.
    """

    X: np.ndarray
    y: np.ndarray
    lam: float
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.X.ndim != 2 or self.y.ndim != 1:
            raise ConfigError("X must be 2-d and y 1-d")
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ConfigError(f"need n >= 1 and p >= 1, got X of shape {self.X.shape}")
        if self.y.shape[0] != n:
            raise ConfigError(f"y has {self.y.shape[0]} entries for {n} observations")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ConfigError("X and y must be finite")
        if not (self.lam >= 0.0):
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if self.tol <= 0 or self.max_sweeps < 1:
            raise ConfigError("tol must be positive and max_sweeps >= 1")


@dataclass
class LassoSolution:
    """Coefficients, intercept, and convergence diagnostics."""

    coef: np.ndarray
    intercept: float
    sweeps_used: int
    converged: bool


def soft_threshold(z, gamma):
    """Shrink z toward zero by gamma: sign(z) * max(|z| - gamma, 0)."""
    return np.sign(z) * np.maximum(np.abs(z) - gamma, 0.0)


@njit(cache=True, nogil=True)
def _cd_kernel(X, y, lam, tol, max_sweeps, w, col_sq, active):
    """Cyclic coordinate descent on one response. Mutates w in place."""
    n, p = X.shape
    b = y.mean()
    # residual r = y - X w - b, maintained incrementally (w starts at 0)
    r = y - b
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_delta = 0.0
        for k in range(p):
            if not active[k]:
                continue
            old = w[k]
            # partial residual correlation: rho = x_k . (r + x_k w_k) / n
            rho = 0.0
            for t in range(n):
                rho += X[t, k] * r[t]
            rho = rho / n + col_sq[k] * old
            if rho > lam:
                new = (rho - lam) / col_sq[k]
            elif rho < -lam:
                new = (rho + lam) / col_sq[k]
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                for t in range(n):
                    r[t] -= d * X[t, k]
                w[k] = new
            ad = abs(d)
            if ad > max_delta:
                max_delta = ad
        # re-fit the unpenalized intercept to the mean residual
        db = r.mean()
        if db != 0.0:
            b += db
            for t in range(n):
                r[t] -= db
        sweeps += 1
        if max_delta < tol:
            converged = True
            break
    return b, sweeps, converged


def _column_stats(X):
    """Mean-square norms and active mask; constant columns go inactive."""
    n = X.shape[0]
    col_sq = np.einsum("tk,tk->k", X, X) / n
    var = X.var(axis=0)
    active = var > _CONST_COL_RTOL * np.maximum(col_sq, 1.0)
    return col_sq, active


def solve(problem):
    """Solve one LassoProblem and return a LassoSolution.

    Starts from w = 0 with the intercept at mean(y).  Constant (zero
    variance) columns keep a zero coefficient.  If max_sweeps is
    exhausted before the coefficients settle, the current iterate is
    returned with ``converged=False``.
    """
    X, y = problem.X, problem.y
    col_sq, active = _column_stats(X)
    w = np.zeros(X.shape[1])
    b, sweeps, converged = _cd_kernel(
        X, y, float(problem.lam), float(problem.tol), int(problem.max_sweeps),
        w, col_sq, active,
    )
    return LassoSolution(coef=w, intercept=float(b), sweeps_used=int(sweeps),
                         converged=bool(converged))


def solve_multi(X, Y, lam, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS):
    """Solve one lasso per row of Y against a shared design matrix.

    Equivalent to calling :func:`solve` once per response row; shares the
    column precomputation.  Returns (W, intercepts, sweeps, converged)
    with W of shape (n_responses, p).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != X.shape[0]:
        raise ConfigError(f"Y must be (n_responses, {X.shape[0]}), got {Y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise ConfigError("X and Y must be finite")
    if not (lam >= 0.0):
        raise ConfigError(f"lam must be >= 0, got {lam}")
    col_sq, active = _column_stats(X)
    n_resp, p = Y.shape[0], X.shape[1]
    W = np.zeros((n_resp, p))
    intercepts = np.zeros(n_resp)
    sweeps = np.zeros(n_resp, dtype=np.int64)
    converged = np.zeros(n_resp, dtype=bool)
    for k in range(n_resp):
        b, s, c = _cd_kernel(X, Y[k], float(lam), float(tol), int(max_sweeps),
                             W[k], col_sq, active)
        intercepts[k] = b
        sweeps[k] = s
        converged[k] = c
    return W, intercepts, sweeps, converged


def objective(X, y, coef, intercept, lam):
    """Penalized objective value at (coef, intercept)."""
    n = X.shape[0]
    r = y - X @ coef - intercept
    return 0.5 * (r @ r) / n + lam * np.abs(coef).sum()


def kkt_violation(X, y, coef, intercept, lam):
    """Largest stationarity violation at (coef, intercept).

    With g = X^T (y - X coef - intercept) / n, an exact solution has
    g_k = lam * sign(coef_k) on active coordinates, |g_k| <= lam on
    inactive ones, and mean residual zero (free intercept).  Returns the
    max absolute slack over all three conditions; constant columns are
    excluded since their coefficient is pinned.
    """
    n = X.shape[0]
    r = y - X @ coef - intercept
    g = X.T @ r / n
    _, active_cols = _column_stats(X)
    nonzero = (coef != 0.0) & active_cols
    zero = (coef == 0.0) & active_cols
    worst = abs(float(np.mean(r)))
    if nonzero.any():
        worst = max(worst, float(np.max(np.abs(g[nonzero] - lam * np.sign(coef[nonzero])))))
    if zero.any():
        worst = max(worst, float(np.max(np.maximum(np.abs(g[zero]) - lam, 0.0))))
    return worst
