"""Synthetic drifting-preference corpus generator.

Draws ground-truth user and item factors, evolves each user's vector
with a private linear map (identity plus a random deviation, plus a
random drift vector), samples a sparse set of (user, item) pairs,
assigns each pair a uniform time step, and scores it against the truth
at that step.  Pairs landing on the final step become the test set; the
rest populate the per-step training matrices directly (window = 1).

Draw order from the single seeded generator is frozen so a seed always
reproduces the same corpus: initial user factors, item factors,
per-user deviations, per-user drifts, observed pairs, step labels, then
optional noise.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import FORMAT_DELIMITERS, IdMaps, SlicedCorpus, SparseRatings
from .errors import ConfigError

_log = logging.getLogger(__name__)

TRUTH_FORMAT_VERSION = 1


def _check_range(name, rng_pair):
    lo, hi = rng_pair
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ConfigError(f"{name} must be a finite (lo, hi) with lo <= hi, got {rng_pair}")


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the generator; defaults give a desk-scale drifting world."""

    n_users: int = 2000
    n_items: int = 2000
    density: float = 0.01
    n_factors: int = 30
    n_steps: int = 10
    trans_range: tuple = (-0.1, 0.1)     # entries of the deviation from identity
    bias_range: tuple = (-0.01, 0.01)    # entries of the per-user drift vector
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.n_items < 1:
            raise ConfigError("need at least one user and one item")
        if not 0.0 < self.density <= 1.0:
            raise ConfigError(f"density must be in (0, 1], got {self.density}")
        if self.n_factors < 1:
            raise ConfigError(f"n_factors must be >= 1, got {self.n_factors}")
        if self.n_steps < 3:
            raise ConfigError(f"n_steps must be >= 3, got {self.n_steps}")
        _check_range("trans_range", self.trans_range)
        _check_range("bias_range", self.bias_range)
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass
class SynthTruth:
    """Ground truth behind a generated corpus."""

    states: np.ndarray         # (n_steps, n_users, n_factors); states[t-1] = step t
    item_factors: np.ndarray   # (n_items, n_factors)
    deviation: np.ndarray      # (n_users, D, D) per-user transition minus identity
    drift: np.ndarray          # (n_users, D)

    def state(self, t):
        """True user factors at 1-based step t."""
        if not 1 <= t <= self.states.shape[0]:
            raise IndexError(f"step must be in [1, {self.states.shape[0]}], got {t}")
        return self.states[t - 1]


def generate(cfg):
    """Build (SlicedCorpus, SynthTruth) from a SynthConfig.

    The observed-pair count is round(n_users * n_items * density),
    sampled without replacement; a step left with no ratings is only
    warned about (the tracker holds factors there).
    """
    rng = np.random.default_rng(cfg.seed)
    m, n, d, t_total = cfg.n_users, cfg.n_items, cfg.n_factors, cfg.n_steps
    user0 = rng.random((m, d))
    item_factors = rng.random((n, d))
    deviation = rng.uniform(cfg.trans_range[0], cfg.trans_range[1], (m, d, d))
    drift = rng.uniform(cfg.bias_range[0], cfg.bias_range[1], (m, d))

    states = np.empty((t_total, m, d))
    states[0] = user0
    for t in range(1, t_total):
        prev = states[t - 1]
        states[t] = prev + np.einsum("ukd,ud->uk", deviation, prev) + drift

    n_obs = int(round(m * n * cfg.density))
    if n_obs < 1:
        raise ConfigError("density too low: rounds to zero observed pairs")
    flat = rng.choice(m * n, size=n_obs, replace=False)
    users = (flat // n).astype(np.int64)
    items = (flat % n).astype(np.int64)
    step_of = rng.integers(1, t_total + 1, size=n_obs)
    values = np.einsum("od,od->o", states[step_of - 1, users, :], item_factors[items])
    if cfg.noise_sd > 0:
        values = values + rng.normal(0.0, cfg.noise_sd, size=n_obs)

    ids = IdMaps([f"u{i}" for i in range(m)], [f"i{j}" for j in range(n)])
    steps = []
    for t in range(1, t_total):
        mask = step_of == t
        if not mask.any():
            _log.warning("no ratings landed in step %d; factors hold still there", t)
        steps.append(SparseRatings(users[mask], items[mask], values[mask], m, n))
    train_mask = step_of < t_total
    corpus = SlicedCorpus(
        t_total=t_total,
        window=1,
        n_slices=t_total,
        steps=steps,
        training=SparseRatings(users[train_mask], items[train_mask],
                               values[train_mask], m, n),
        testing=SparseRatings(users[~train_mask], items[~train_mask],
                              values[~train_mask], m, n),
        ids=ids,
    )
    return corpus, SynthTruth(states, item_factors, deviation, drift)


def write_logs(corpus, path, fmt="csv"):
    """Export a generated corpus as ingestible rating logs.

    The step index doubles as the timestamp, so re-ingesting with
    n_slices = t_total, window = 1 and duration-based slicing rebuilds
    the same per-step split.  Only window-1 corpora can be exported
    (wider windows would duplicate shared slices).
    """
    if fmt not in FORMAT_DELIMITERS:
        raise ConfigError(f"unknown format {fmt!r}; expected one of {sorted(FORMAT_DELIMITERS)}")
    if corpus.window != 1:
        raise ConfigError("only window-1 corpora can be exported as logs")
    delim = FORMAT_DELIMITERS[fmt]
    ids = corpus.ids
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delim.join(("user", "item", "rating", "timestamp")) + "\n")

        def dump(sp, stamp):
            for i, j, v in zip(sp.users, sp.items, sp.values):
                fh.write(delim.join((ids.users[i], ids.items[j], repr(float(v)),
                                     str(stamp))) + "\n")

        for t, sp in enumerate(corpus.steps, start=1):
            dump(sp, t)
        dump(corpus.testing, corpus.t_total)


def save_truth(truth, path):
    meta = {"format_version": TRUTH_FORMAT_VERSION}
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        states=truth.states,
        item_factors=truth.item_factors,
        deviation=truth.deviation,
        drift=truth.drift,
    )


def load_truth(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != TRUTH_FORMAT_VERSION:
            raise ConfigError(f"unsupported truth format {meta.get('format_version')}")
        return SynthTruth(data["states"], data["item_factors"],
                          data["deviation"], data["drift"])
