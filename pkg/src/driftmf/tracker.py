"""Per-step user factor tracking against frozen item factors.

Every time step re-fits each user's factor vector by SGD over only that
step's ratings, always starting from the globally trained vector (not
the previous step's), with item factors read-only.  A user with no
ratings in a step therefore keeps the global vector, and each user's
path through the steps is independent of every other user's data.

Shuffle randomness is drawn from a small counter-based generator keyed
by (seed, user, step), so trajectories do not depend on traversal order
and per-user work can run concurrently without changing results.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DivergenceError

TRAJECTORY_FORMAT_VERSION = 1

_U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    state[0] = state[0] + _U64_GOLDEN
    return _mix64(state[0])


@njit(cache=True, nogil=True)
def _step_kernel(indptr, items, values, item_factors, base, alpha, reg,
                 epochs, seed, step, out, u_lo, u_hi):
    d = base.shape[1]
    for i in range(u_lo, u_hi):
        for k in range(d):
            out[i, k] = base[i, k]
        lo = indptr[i]
        n = indptr[i + 1] - lo
        if n == 0:
            continue
        order = np.empty(n, dtype=np.int64)
        rs = np.empty(1, dtype=np.uint64)
        rs[0] = _mix64(seed + _U64_GOLDEN * np.uint64(i + 1))
        rs[0] = _mix64(rs[0] + _U64_GOLDEN * np.uint64(step))
        for _ in range(epochs):
            for a in range(n):
                order[a] = a
            for a in range(n - 1, 0, -1):
                b = np.int64(_next_u64(rs) % np.uint64(a + 1))
                tmp = order[a]
                order[a] = order[b]
                order[b] = tmp
            for pos in range(n):
                idx = lo + order[pos]
                j = items[idx]
                pred = 0.0
                for k in range(d):
                    pred += out[i, k] * item_factors[j, k]
                e = values[idx] - pred
                for k in range(d):
                    out[i, k] += alpha * (e * item_factors[j, k] - reg * out[i, k])


@dataclass
class Trajectories:
    """Tracked user states: ``states[t]`` holds all users at step t+1.

    Shape (n_steps, n_users, n_factors); step indices are 1-based in
    reports, so ``states[0]`` is step 1 and ``states[-1]`` the last
    observed step.
    """

    states: np.ndarray

    def __post_init__(self):
        self.states = np.ascontiguousarray(self.states, dtype=np.float64)
        if self.states.ndim != 3:
            raise ConfigError("trajectory states must be (n_steps, n_users, n_factors)")

    @property
    def n_steps(self):
        return self.states.shape[0]

    @property
    def n_users(self):
        return self.states.shape[1]

    @property
    def n_factors(self):
        return self.states.shape[2]

    def deltas(self):
        """Step-to-step state changes, shape (n_steps - 1, n_users, n_factors)."""
        return self.states[1:] - self.states[:-1]

    def user_states(self, i):
        """(n_steps, n_factors) view of one user's path."""
        return self.states[:, i, :]

    def last(self):
        return self.states[-1]


def _run_step(ratings, item_factors, base, alpha, reg, epochs, seed, step, out, threads):
    args = (ratings.indptr, ratings.items, ratings.values, item_factors, base,
            alpha, reg, epochs, seed, step, out)
    n_users = base.shape[0]
    if threads <= 1 or n_users < 2 * threads:
        _step_kernel(*args, 0, n_users)
        return
    bounds = np.linspace(0, n_users, threads + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_step_kernel, *args, bounds[w], bounds[w + 1])
                   for w in range(threads)]
        for f in futures:
            f.result()


def track(corpus, model, hp, epochs=None, learning_rate=None, threads=1):
    """Learn one factor vector per (user, step) from a trained model.

    Args:
        corpus: SlicedCorpus whose steps to track.
        model: FactorModel trained on corpus.training; item factors are
            used read-only.
        hp: HyperParams; reg and seed always come from here.
        epochs: per-step SGD passes (default hp.epochs).
        learning_rate: per-step step size (default hp.learning_rate);
            large corpora often want a smaller one here.
        threads: user-parallel workers; results are identical for any
            thread count.

    Returns:
        Trajectories over corpus.t_total - 1 steps.
    """
    if model.n_users != corpus.n_users or model.n_items != corpus.n_items:
        raise ConfigError("model dimensions do not match corpus")
    epochs = hp.epochs if epochs is None else int(epochs)
    alpha = hp.learning_rate if learning_rate is None else float(learning_rate)
    if epochs < 1 or alpha <= 0:
        raise ConfigError("epochs must be >= 1 and learning rate > 0")
    n_steps = corpus.t_total - 1
    out = np.empty((n_steps, corpus.n_users, model.n_factors))
    seed = np.uint64(hp.seed)
    for t, step_ratings in enumerate(corpus.steps):
        _run_step(step_ratings, model.item_factors, model.user_factors,
                  alpha, hp.reg, epochs, seed, t + 1, out[t], threads)
        bad = ~np.isfinite(out[t]).all(axis=1)
        if bad.any():
            u = int(np.flatnonzero(bad)[0])
            raise DivergenceError(
                f"tracking diverged for user {u} at step {t + 1}; "
                "lower the learning rate")
    return Trajectories(out)


def write_trajectories_csv(traj, path, ids=None):
    """Dump states as `user,step,f1..fD` rows for outside inspection."""
    d = traj.n_factors
    header = "user,step," + ",".join(f"f{k + 1}" for k in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(traj.n_users):
            name = ids.users[i] if ids is not None else str(i)
            for t in range(traj.n_steps):
                row = ",".join(repr(float(v)) for v in traj.states[t, i])
                fh.write(f"{name},{t + 1},{row}\n")


def save_trajectories(traj, path):
    meta = {"format_version": TRAJECTORY_FORMAT_VERSION,
            "n_steps": traj.n_steps, "n_users": traj.n_users,
            "n_factors": traj.n_factors}
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        states=traj.states,
    )


def load_trajectories(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != TRAJECTORY_FORMAT_VERSION:
            raise ConfigError(f"unsupported trajectory format {meta.get('format_version')}")
        return Trajectories(data["states"])
