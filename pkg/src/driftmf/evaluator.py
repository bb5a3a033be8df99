"""Test-set accuracy and latent-trajectory dissimilarity reporting.

RMSE is the only rating metric; trajectory quality on synthetic corpora
is measured by the per-user factor-space RMSE against the ground truth,
averaged over users at each step, for both the tracked states and the
static baseline.
"""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, EmptyTestSetError

MIN_RATINGS_FOR_FLAG = 3


def rmse(predicted, actual):
    """Root mean squared error between two aligned value arrays."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ConfigError("prediction and actual arrays differ in shape")
    if predicted.size == 0:
        raise EmptyTestSetError("cannot score an empty test set")
    resid = predicted - actual
    return float(np.sqrt(resid @ resid / resid.size))


def rmse_pairs(users, items, predicted, actuals):
    """RMSE of predictions addressed by (user, item) against stored ratings.

    Every addressed pair must exist in `actuals`; predictions for pairs
    the test set never rated are refused rather than silently scored.
    """
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if not (users.shape == items.shape == predicted.shape):
        raise ConfigError("users, items and predictions must align")
    if predicted.size == 0 or actuals.n_ratings == 0:
        raise EmptyTestSetError("cannot score an empty test set")
    lookup = actuals.lookup()
    try:
        actual = np.array([lookup[(int(i), int(j))] for i, j in zip(users, items)])
    except KeyError as exc:
        raise ConfigError(f"prediction addresses unrated pair {exc.args[0]}") from None
    return rmse(predicted, actual)


def dissimilarity(x, y):
    """Per-factor RMSE between two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("dissimilarity needs two equal-length vectors")
    d = x - y
    return float(np.sqrt(d @ d / d.size))


@dataclass
class DissimilarityCurve:
    """Mean factor-space error per step, tracked vs. static baseline."""

    steps: np.ndarray      # 1-based step indices, length n_steps
    static: np.ndarray     # mean over users of s(truth, global factors)
    tracked: np.ndarray    # mean over users of s(truth, tracked state)

    def gain(self):
        """Relative improvement of tracked over static per step."""
        with np.errstate(divide="ignore", invalid="ignore"):
            g = 1.0 - self.tracked / self.static
        return np.where(self.static > 0, g, 0.0)


def dissimilarity_curve(trajectories, truth, model):
    """Compare tracked states and the static factors against the truth.

    Truth covers steps 1..T while trajectories stop at T-1; the curve is
    evaluated on the observed steps 1..T-1.
    """
    s = trajectories.n_steps
    if truth.states.shape[0] != s + 1:
        raise ConfigError("truth must cover exactly one step past the trajectories")
    if truth.states.shape[1:] != trajectories.states.shape[1:]:
        raise ConfigError("truth and trajectory dimensions differ")
    if model.user_factors.shape != trajectories.states.shape[1:]:
        raise ConfigError("model dimensions do not match trajectories")
    true_states = truth.states[:s]
    diff_tracked = trajectories.states - true_states
    diff_static = model.user_factors[None, :, :] - true_states
    tracked = np.sqrt((diff_tracked ** 2).mean(axis=2)).mean(axis=1)
    static = np.sqrt((diff_static ** 2).mean(axis=2)).mean(axis=1)
    return DissimilarityCurve(np.arange(1, s + 1), static, tracked)


def write_curve_csv(curve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,static,tracked\n")
        for t, s, r in zip(curve.steps, curve.static, curve.tracked):
            fh.write(f"{int(t)},{float(s)!r},{float(r)!r}\n")


@dataclass
class UserComparison:
    user: str
    n_ratings: int
    rmse_static: float
    rmse_tracked: float
    bias_flag: str          # "over", "under", or ""


@dataclass
class EvalReport:
    """Side-by-side test accuracy of the static and tracked predictors."""

    rmse_static: float
    rmse_tracked: float
    improvement_pct: float      # 100 * (1 - tracked/static), 2 decimals
    n_test: int
    per_user: list

    def scalars(self):
        d = asdict(self)
        d.pop("per_user")
        return d


def _flag(residuals):
    if residuals.size < MIN_RATINGS_FOR_FLAG:
        return ""
    if np.all(residuals > 0):
        return "over"
    if np.all(residuals < 0):
        return "under"
    return ""


def compare_report(corpus, static_pred, tracked_pred):
    """Score two prediction vectors aligned with corpus.testing triplets.

    Per-user rows follow user-index order; a user is flagged when the
    static predictor misses every one of their (3 or more) test ratings
    on the same side.
    """
    test = corpus.testing
    if test.n_ratings == 0:
        raise EmptyTestSetError("test set is empty (filtered away?)")
    static_pred = np.asarray(static_pred, dtype=np.float64)
    tracked_pred = np.asarray(tracked_pred, dtype=np.float64)
    if static_pred.shape != (test.n_ratings,) or tracked_pred.shape != (test.n_ratings,):
        raise ConfigError("prediction vectors must align with the test triplets")
    resid_s = static_pred - test.values
    resid_t = tracked_pred - test.values
    overall_s = rmse(static_pred, test.values)
    overall_t = rmse(tracked_pred, test.values)
    per_user = []
    for i in range(test.n_users):
        lo, hi = test.indptr[i], test.indptr[i + 1]
        if lo == hi:
            continue
        rs = resid_s[lo:hi]
        rt = resid_t[lo:hi]
        per_user.append(UserComparison(
            user=corpus.ids.users[i],
            n_ratings=int(hi - lo),
            rmse_static=float(np.sqrt((rs @ rs) / rs.size)),
            rmse_tracked=float(np.sqrt((rt @ rt) / rt.size)),
            bias_flag=_flag(rs),
        ))
    improvement = 100.0 * (1.0 - overall_t / overall_s) if overall_s > 0 else 0.0
    return EvalReport(
        rmse_static=overall_s,
        rmse_tracked=overall_t,
        improvement_pct=round(improvement, 2),
        n_test=int(test.n_ratings),
        per_user=per_user,
    )


def write_report_json(report, path, extra=None):
    """Scalar report (plus optional extra sections) as sorted JSON."""
    doc = report.scalars()
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_report_csv(report, path):
    """Per-user comparison table."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "n_ratings", "rmse_static", "rmse_tracked", "bias_flag"])
        for row in report.per_user:
            writer.writerow([row.user, row.n_ratings, repr(row.rmse_static),
                             repr(row.rmse_tracked), row.bias_flag])
