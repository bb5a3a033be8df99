"""Tour of the coordinate-descent lasso solver.

Builds one small regression with a sparse true coefficient vector and
walks the regularization path: as the penalty grows, coefficients are
zeroed out one by one until only the intercept survives.  Along the way
the script checks the unpenalized fit against plain least squares and
the penalized fits against their optimality conditions.

Run:  python demos/lasso_path.py
"""

import numpy as np

from driftmf import lasso

rng = np.random.default_rng(11)
n, p = 40, 6
X = rng.standard_normal((n, p))
true_w = np.array([1.5, 0.0, -0.8, 0.0, 0.0, 0.4])
y = X @ true_w + 0.7 + 0.05 * rng.standard_normal(n)
print(f"true coefficients: {true_w}, intercept 0.7")
print()

print("lambda     nnz   l1 norm   objective   max KKT violation")
for lam in (0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 3.0):
    sol = lasso.solve(lasso.LassoProblem(X=X, y=y, lam=lam))
    obj = lasso.objective(X, y, sol.coef, sol.intercept, lam)
    viol = lasso.kkt_violation(X, y, sol.coef, sol.intercept, lam)
    nnz = int(np.count_nonzero(sol.coef))
    print(f"{lam:6.2f}   {nnz:4d}   {np.abs(sol.coef).sum():7.3f}   "
          f"{obj:9.4f}   {viol:.2e}")

# With no penalty the solver is ordinary least squares.
sol0 = lasso.solve(lasso.LassoProblem(X=X, y=y, lam=0.0, tol=1e-10))
beta, *_ = np.linalg.lstsq(np.column_stack([np.ones(n), X]), y, rcond=None)
gap = max(np.max(np.abs(sol0.coef - beta[1:])), abs(sol0.intercept - beta[0]))
print(f"\nlam=0 vs least squares: max coefficient gap {gap:.2e}")

# The intercept is never penalized, so killing every coefficient leaves
# the response mean.
big = lasso.solve(lasso.LassoProblem(X=X, y=y, lam=100.0))
print(f"lam=100: all coefficients zero -> intercept {big.intercept:.4f} "
      f"(mean of y is {y.mean():.4f})")
