"""Static matrix factorization trained by stochastic gradient descent.

Fits user and item factor matrices to observed ratings by minimizing

    0.5 * sum (r_ij - q_j . p_i)^2 + 0.5 * reg * (||P||^2 + ||Q||^2)

One pass visits every training triplet in a freshly shuffled order and
nudges both factor vectors against the gradient.  Within a triplet the
residual is computed once and both vectors update from that snapshot
(the item update sees the pre-update user vector).
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DivergenceError, EmptyCorpusError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class HyperParams:
    """SGD settings: factor count, step size, shrinkage, passes, seed."""

    n_factors: int = 30
    learning_rate: float = 0.01
    reg: float = 0.02
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_factors < 1:
            raise ConfigError(f"n_factors must be >= 1, got {self.n_factors}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.reg < 0:
            raise ConfigError(f"reg must be >= 0, got {self.reg}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass
class FactorModel:
    """Fitted factors, one row per user and one per item."""

    user_factors: np.ndarray        # (n_users, n_factors)
    item_factors: np.ndarray        # (n_items, n_factors)

    def __post_init__(self):
        self.user_factors = np.ascontiguousarray(self.user_factors, dtype=np.float64)
        self.item_factors = np.ascontiguousarray(self.item_factors, dtype=np.float64)
        if self.user_factors.ndim != 2 or self.item_factors.ndim != 2:
            raise ConfigError("factor matrices must be 2-d")
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise ConfigError("user and item factor widths differ")

    @property
    def n_users(self):
        return self.user_factors.shape[0]

    @property
    def n_items(self):
        return self.item_factors.shape[0]

    @property
    def n_factors(self):
        return self.user_factors.shape[1]


@njit(cache=True, nogil=True)
def _sgd_epoch(users, items, values, order, uf, itf, alpha, reg):
    d = uf.shape[1]
    for pos in range(order.size):
        idx = order[pos]
        i = users[idx]
        j = items[idx]
        pred = 0.0
        for k in range(d):
            pred += uf[i, k] * itf[j, k]
        e = values[idx] - pred
        for k in range(d):
            pk = uf[i, k]
            qk = itf[j, k]
            uf[i, k] = pk + alpha * (e * qk - reg * pk)
            itf[j, k] = qk + alpha * (e * pk - reg * qk)


def train(training, hp):
    """Fit a FactorModel to a SparseRatings training set.

    Factors initialize uniformly in (0, 1) from the seed; each epoch
    shuffles the triplet order from the same generator, so results are
    bitwise reproducible for a given (training, hp) pair.
    """
    if training.n_ratings == 0:
        raise EmptyCorpusError("cannot train on an empty rating set")
    rng = np.random.default_rng(hp.seed)
    uf = rng.random((training.n_users, hp.n_factors))
    itf = rng.random((training.n_items, hp.n_factors))
    for epoch in range(hp.epochs):
        order = rng.permutation(training.n_ratings)
        _sgd_epoch(training.users, training.items, training.values, order,
                   uf, itf, hp.learning_rate, hp.reg)
        if not (np.all(np.isfinite(uf)) and np.all(np.isfinite(itf))):
            raise DivergenceError(
                f"SGD produced non-finite factors at epoch {epoch + 1}; "
                "lower the learning rate")
    return FactorModel(uf, itf)


def objective(ratings, model, reg):
    """Regularized squared-error objective of a model on a rating set."""
    uf = model.user_factors
    itf = model.item_factors
    if ratings.n_ratings:
        pred = np.einsum("ij,ij->i", uf[ratings.users], itf[ratings.items])
        resid = ratings.values - pred
        sq = float(resid @ resid)
    else:
        sq = 0.0
    penalty = float((uf * uf).sum()) + float((itf * itf).sum())
    return 0.5 * sq + 0.5 * reg * penalty


def _apply_clamp(values, clamp):
    if clamp is None:
        return values
    lo, hi = clamp
    if lo > hi:
        raise ConfigError(f"clamp range is inverted: ({lo}, {hi})")
    return np.clip(values, lo, hi)


def predict(model, user, item, clamp=None):
    """Inner-product rating prediction, optionally clamped to a range."""
    if not 0 <= user < model.n_users:
        raise IndexError(f"user index {user} out of range")
    if not 0 <= item < model.n_items:
        raise IndexError(f"item index {item} out of range")
    val = float(model.user_factors[user] @ model.item_factors[item])
    return float(_apply_clamp(np.float64(val), clamp))


def predict_many(model, users, items, clamp=None):
    """Vectorized predict() over aligned index arrays."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    if users.size and (users.min() < 0 or users.max() >= model.n_users):
        raise IndexError("user index out of range")
    if items.size and (items.min() < 0 or items.max() >= model.n_items):
        raise IndexError("item index out of range")
    vals = np.einsum("ij,ij->i", model.user_factors[users], model.item_factors[items])
    return _apply_clamp(vals, clamp)


def save_model(model, hp, path):
    """Write factors plus the settings that produced them to a .npz."""
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "n_users": model.n_users,
        "n_items": model.n_items,
        "n_factors": model.n_factors,
        "hyper": asdict(hp),
    }
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        user_factors=model.user_factors,
        item_factors=model.item_factors,
    )


def load_model(path):
    """Inverse of :func:`save_model`; returns (model, hyperparams)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise ConfigError(f"unsupported model format {meta.get('format_version')}")
        model = FactorModel(data["user_factors"], data["item_factors"])
        hp = HyperParams(**meta["hyper"])
    if (model.n_users, model.n_items) != (meta["n_users"], meta["n_items"]):
        raise ConfigError("model header disagrees with stored matrices")
    return model, hp
