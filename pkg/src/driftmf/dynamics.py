"""Per-user linear drift models fit to tracked factor trajectories.

Each user's step-to-step factor change is regressed on the preceding
state, one factor row at a time, with an L1 penalty:

    change_k(t) ~ w_k . state(t-1) + c_k        (rows k independent)

The rows stack into a deviation matrix and a drift vector; the one-step
forecast is then state + deviation @ state + drift, i.e. the identity
map plus the learned correction.  Users whose trajectories are too
short keep the identity map (zero deviation, zero drift).
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lasso
from .errors import ConfigError

IDENTITY_EPS = 1e-8
TRANSITIONS_FORMAT_VERSION = 1

REGRESSOR_CHOICES = ("previous", "current")


@dataclass
class TransitionModel:
    """One user's fitted drift: deviation from identity plus bias."""

    user: int
    deviation: np.ndarray        # (D, D)
    drift: np.ndarray            # (D,)
    fitted: bool = True          # False -> too few observations, identity kept
    converged: bool = True

    def __post_init__(self):
        self.deviation = np.ascontiguousarray(self.deviation, dtype=np.float64)
        self.drift = np.ascontiguousarray(self.drift, dtype=np.float64)
        if self.deviation.shape != (self.drift.size, self.drift.size):
            raise ConfigError("deviation must be square and match drift length")
        if not (np.isfinite(self.deviation).all() and np.isfinite(self.drift).all()):
            raise ConfigError(f"non-finite transition entries for user {self.user}")

    @property
    def identity_like(self):
        """True when the model is numerically just the identity map."""
        return (float(np.abs(self.deviation).sum()) == 0.0
                and float(np.linalg.norm(self.drift)) <= IDENTITY_EPS)


def fit_transition(user, states, lam, regress_on="previous",
                   tol=lasso.DEFAULT_TOL, max_sweeps=lasso.DEFAULT_MAX_SWEEPS):
    """Fit one user's TransitionModel from their (n_steps, D) states.

    Needs at least 3 states (2 observed changes); with fewer the
    identity fallback is returned with fitted=False.  `regress_on`
    picks the regressor state for each change: "previous" (the
    state-update convention the forecast uses) or "current" (an
    alternative reading; see README notes on the trade-off).
    """
    if regress_on not in REGRESSOR_CHOICES:
        raise ConfigError(f"regress_on must be one of {REGRESSOR_CHOICES}, got {regress_on!r}")
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2:
        raise ConfigError("states must be (n_steps, n_factors)")
    d = states.shape[1]
    changes = states[1:] - states[:-1]
    if changes.shape[0] < 2:
        return TransitionModel(user, np.zeros((d, d)), np.zeros(d), fitted=False)
    X = states[:-1] if regress_on == "previous" else states[1:]
    W, intercepts, _, converged = lasso.solve_multi(X, changes.T, lam,
                                                    tol=tol, max_sweeps=max_sweeps)
    return TransitionModel(user, W, intercepts, fitted=True,
                           converged=bool(converged.all()))


@dataclass
class TransitionSet:
    """Stacked per-user transitions plus fit diagnostics."""

    deviation: np.ndarray        # (n_users, D, D)
    drift: np.ndarray            # (n_users, D)
    fitted: np.ndarray           # (n_users,) bool
    converged: np.ndarray        # (n_users,) bool

    @property
    def n_users(self):
        return self.drift.shape[0]

    @property
    def n_factors(self):
        return self.drift.shape[1]

    def model(self, i):
        return TransitionModel(i, self.deviation[i], self.drift[i],
                               fitted=bool(self.fitted[i]),
                               converged=bool(self.converged[i]))

    def identity_like(self):
        dev_l1 = np.abs(self.deviation).sum(axis=(1, 2))
        drift_norm = np.linalg.norm(self.drift, axis=1)
        return (dev_l1 == 0.0) & (drift_norm <= IDENTITY_EPS)

    def nnz_per_user(self):
        return (self.deviation != 0.0).sum(axis=(1, 2))

    def summary(self):
        ident = self.identity_like()
        return {
            "n_users": int(self.n_users),
            "n_identity_like": int(ident.sum()),
            "n_drifting": int((~ident).sum()),
            "n_fallback": int((~self.fitted).sum()),
            "n_unconverged": int((~self.converged).sum()),
            "mean_nnz": float(self.nnz_per_user().mean()) if self.n_users else 0.0,
        }


def fit_all(trajectories, lam, regress_on="previous", tol=lasso.DEFAULT_TOL,
            max_sweeps=lasso.DEFAULT_MAX_SWEEPS, threads=1):
    """Fit every user's transition from a Trajectories bundle.

    Row problems are independent, so user order and thread count do not
    affect the result.
    """
    m = trajectories.n_users
    d = trajectories.n_factors
    deviation = np.zeros((m, d, d))
    drift = np.zeros((m, d))
    fitted = np.zeros(m, dtype=bool)
    converged = np.ones(m, dtype=bool)

    def fit_range(lo, hi):
        for i in range(lo, hi):
            model = fit_transition(i, trajectories.user_states(i), lam,
                                   regress_on=regress_on, tol=tol,
                                   max_sweeps=max_sweeps)
            deviation[i] = model.deviation
            drift[i] = model.drift
            fitted[i] = model.fitted
            converged[i] = model.converged

    if threads <= 1 or m < 2 * threads:
        fit_range(0, m)
    else:
        bounds = np.linspace(0, m, threads + 1).astype(np.int64)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(fit_range, bounds[w], bounds[w + 1])
                       for w in range(threads)]
            for f in futures:
                f.result()
    return TransitionSet(deviation, drift, fitted, converged)


def forecast(model, state):
    """Advance one state by a TransitionModel: state + dev @ state + drift."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (model.drift.size,):
        raise ConfigError("state length does not match transition model")
    return state + model.deviation @ state + model.drift


def forecast_all(tset, last_states):
    """Advance every user's last tracked state one step forward."""
    last_states = np.asarray(last_states, dtype=np.float64)
    if last_states.shape != tset.drift.shape:
        raise ConfigError("states shape does not match transition set")
    return last_states + np.einsum("ukd,ud->uk", tset.deviation, last_states) + tset.drift


def predict_from_states(states, item_factors, users, items, clamp=None):
    """Rating predictions Q_j . state_i for aligned (user, item) arrays."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    vals = np.einsum("ij,ij->i", states[users], item_factors[items])
    if clamp is None:
        return vals
    lo, hi = clamp
    if lo > hi:
        raise ConfigError(f"clamp range is inverted: ({lo}, {hi})")
    return np.clip(vals, lo, hi)


def write_transitions_jsonl(tset, path, ids=None):
    """One JSON record per user: sparsity, drift size, identity flag."""
    ident = tset.identity_like()
    nnz = tset.nnz_per_user()
    norms = np.linalg.norm(tset.drift, axis=1)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(tset.n_users):
            rec = {
                "user": ids.users[i] if ids is not None else i,
                "nnz": int(nnz[i]),
                "drift_norm": float(norms[i]),
                "identity_like": bool(ident[i]),
                "fitted": bool(tset.fitted[i]),
                "converged": bool(tset.converged[i]),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def save_transitions(tset, path):
    meta = {"format_version": TRANSITIONS_FORMAT_VERSION,
            "n_users": tset.n_users, "n_factors": tset.n_factors}
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        deviation=tset.deviation,
        drift=tset.drift,
        fitted=tset.fitted,
        converged=tset.converged,
    )


def load_transitions(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != TRANSITIONS_FORMAT_VERSION:
            raise ConfigError(f"unsupported transitions format {meta.get('format_version')}")
        return TransitionSet(data["deviation"], data["drift"],
                             data["fitted"], data["converged"])
