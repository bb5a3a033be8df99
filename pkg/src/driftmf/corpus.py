"""Rating-log ingestion, chronological slicing, and sliding-window steps.

A corpus starts life as timestamped (user, item, rating) logs.  The logs
are sorted chronologically, cut into equal slices, and consecutive
slices are merged into overlapping time-step matrices; the final slice
is held out as the test set.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EmptyCorpusError, ParseError

FORMAT_DELIMITERS = {"csv": ",", "tsv": "\t"}

CORPUS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RatingLog:
    """One (user, item, rating, timestamp) event."""

    user: str
    item: str
    rating: float
    timestamp: int


class IdMaps:
    """Bijection between external string ids and dense indices."""

    def __init__(self, users, items):
        self.users = list(users)
        self.items = list(items)
        self.user_to_index = {u: i for i, u in enumerate(self.users)}
        self.item_to_index = {v: j for j, v in enumerate(self.items)}

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


class SparseRatings:
    """Rating triplets stored row-addressable by user (CSR-like).

    Triplets are kept in stable user order: ``indptr[i]:indptr[i+1]``
    addresses user i's entries in ``items`` / ``values``.
    """

    def __init__(self, user_idx, item_idx, values, n_users, n_items):
        user_idx = np.asarray(user_idx, dtype=np.int64)
        item_idx = np.asarray(item_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (user_idx.shape == item_idx.shape == values.shape):
            raise ConfigError("triplet arrays must have equal length")
        if user_idx.size:
            if user_idx.min() < 0 or user_idx.max() >= n_users:
                raise ConfigError("user index out of range")
            if item_idx.min() < 0 or item_idx.max() >= n_items:
                raise ConfigError("item index out of range")
        order = np.argsort(user_idx, kind="stable")
        self.users = user_idx[order]
        self.items = item_idx[order]
        self.values = values[order]
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        counts = np.bincount(self.users, minlength=n_users)
        self.indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        keys = self.users * np.int64(n_items) + self.items
        if np.unique(keys).size != keys.size:
            raise ConfigError("duplicate (user, item) pair in rating triplets")
        self._lookup = None

    @property
    def n_ratings(self):
        return self.users.size

    def user_slice(self, i):
        """(items, values) rated by user i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.items[lo:hi], self.values[lo:hi]

    def pair_set(self):
        return set(zip(self.users.tolist(), self.items.tolist()))

    def lookup(self):
        """Dict view {(i, j): rating}; built lazily and cached."""
        if self._lookup is None:
            self._lookup = {
                (int(i), int(j)): float(v)
                for i, j, v in zip(self.users, self.items, self.values)
            }
        return self._lookup


@dataclass
class SlicedCorpus:
    """Chronological slices merged into overlapping time-step matrices.

    ``steps[t]`` (t = 0..T-2) is the rating matrix of time step t+1;
    ``training`` is the union of all non-test logs and ``testing`` the
    final slice.  Consecutive steps share ``window - 1`` slices.
    """

    t_total: int              # number of time steps T (steps 1..T-1 observed)
    window: int               # slices merged per step
    n_slices: int
    steps: list               # list of SparseRatings, length T-1
    training: SparseRatings
    testing: SparseRatings
    ids: IdMaps

    @property
    def n_users(self):
        return self.ids.n_users

    @property
    def n_items(self):
        return self.ids.n_items


def _parse_line(path, line_no, raw, delim):
    parts = raw.split(delim)
    if len(parts) != 4:
        raise ParseError(path, line_no, f"expected 4 fields, got {len(parts)}")
    user, item, rating_s, ts_s = (p.strip() for p in parts)
    try:
        rating = float(rating_s)
        timestamp = int(float(ts_s))
    except ValueError as exc:
        raise ParseError(path, line_no, f"bad numeric field: {exc}") from None
    if not np.isfinite(rating):
        raise ParseError(path, line_no, f"non-finite rating {rating_s!r}")
    return RatingLog(user=user, item=item, rating=rating, timestamp=timestamp)


def _looks_like_header(raw, delim):
    parts = raw.split(delim)
    if len(parts) != 4:
        return False
    try:
        float(parts[2])
        float(parts[3])
    except ValueError:
        return True
    return False


def ingest(path, fmt="csv"):
    """Read rating logs from a delimited text file.

    Args:
        path: file of ``user,item,rating,timestamp`` records (an optional
            header line is skipped).
        fmt: "csv" or "tsv".

    Returns:
        List of RatingLog in file order.  Duplicate (user, item) pairs
        are resolved by keeping the latest-timestamp record (later input
        wins on ties), so each pair appears at most once.
    """
    if fmt not in FORMAT_DELIMITERS:
        raise ConfigError(f"unknown format {fmt!r}; expected one of {sorted(FORMAT_DELIMITERS)}")
    delim = FORMAT_DELIMITERS[fmt]
    best = {}          # (user, item) -> position in `logs`
    logs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\n").rstrip("\r")
            if not raw:
                continue
            if line_no == 1 and _looks_like_header(raw, delim):
                continue
            log = _parse_line(path, line_no, raw, delim)
            key = (log.user, log.item)
            pos = best.get(key)
            if pos is None:
                best[key] = len(logs)
                logs.append(log)
            elif log.timestamp >= logs[pos].timestamp:
                logs[pos] = log
    if not logs:
        raise EmptyCorpusError(f"{path}: no rating records found")
    return logs


def chronological(logs):
    """Stable sort by timestamp (input order breaks ties)."""
    return sorted(logs, key=lambda log: log.timestamp)


def partition_slices(sorted_logs, n_slices, equal_duration=False):
    """Split chronologically sorted logs into n_slices slices.

    Default is equal cardinality with earlier slices absorbing the
    remainder; ``equal_duration=True`` cuts the timestamp span into
    equal intervals instead (slices may then be empty).
    """
    if n_slices < 2:
        raise ConfigError(f"need at least 2 slices, got {n_slices}")
    n = len(sorted_logs)
    if n == 0:
        raise EmptyCorpusError("cannot slice an empty log list")
    if not equal_duration:
        base, rem = divmod(n, n_slices)
        slices = []
        start = 0
        for k in range(n_slices):
            size = base + (1 if k < rem else 0)
            slices.append(sorted_logs[start:start + size])
            start += size
        return slices
    t_lo = sorted_logs[0].timestamp
    t_hi = sorted_logs[-1].timestamp
    span = (t_hi - t_lo) / n_slices if t_hi > t_lo else 1.0
    slices = [[] for _ in range(n_slices)]
    for log in sorted_logs:
        k = min(int((log.timestamp - t_lo) / span), n_slices - 1)
        slices[k].append(log)
    return slices


def _build_ids(training_logs, testing_logs):
    # dense indices follow first appearance in the sorted training logs;
    # ids seen only in the test slice are appended afterwards
    users, items = [], []
    useen, iseen = set(), set()
    for log in training_logs:
        if log.user not in useen:
            useen.add(log.user)
            users.append(log.user)
        if log.item not in iseen:
            iseen.add(log.item)
            items.append(log.item)
    for log in testing_logs:
        if log.user not in useen:
            useen.add(log.user)
            users.append(log.user)
        if log.item not in iseen:
            iseen.add(log.item)
            items.append(log.item)
    return IdMaps(users, items)


def _to_sparse(logs, ids):
    u = np.fromiter((ids.user_to_index[log.user] for log in logs), dtype=np.int64,
                    count=len(logs))
    v = np.fromiter((ids.item_to_index[log.item] for log in logs), dtype=np.int64,
                    count=len(logs))
    r = np.fromiter((log.rating for log in logs), dtype=np.float64, count=len(logs))
    return SparseRatings(u, v, r, ids.n_users, ids.n_items)


def slice_and_window(logs, n_slices, window, equal_duration=False):
    """Build a SlicedCorpus from raw logs.

    The logs are sorted chronologically and partitioned into n_slices
    slices; the last slice becomes the test set and slices
    ``s .. s+window-1`` merge into step s, giving T-1 = n_slices - window
    steps.
    """
    if n_slices < 2:
        raise ConfigError(f"need at least 2 slices, got {n_slices}")
    if not 1 <= window <= n_slices - 1:
        raise ConfigError(f"window must be in [1, {n_slices - 1}], got {window}")
    if not logs:
        raise EmptyCorpusError("no logs to slice")
    sorted_logs = chronological(logs)
    slices = partition_slices(sorted_logs, n_slices, equal_duration=equal_duration)
    training_logs = [log for sl in slices[:-1] for log in sl]
    testing_logs = slices[-1]
    ids = _build_ids(training_logs, testing_logs)
    n_steps = n_slices - window
    steps = []
    for s in range(n_steps):
        merged = [log for sl in slices[s:s + window] for log in sl]
        steps.append(_to_sparse(merged, ids))
    return SlicedCorpus(
        t_total=n_steps + 1,
        window=window,
        n_slices=n_slices,
        steps=steps,
        training=_to_sparse(training_logs, ids),
        testing=_to_sparse(testing_logs, ids),
        ids=ids,
    )


def filter_test_set(corpus):
    """Drop test triplets whose user or item never occurs in training.

    Returns a new SlicedCorpus sharing everything but the test set; the
    operation is idempotent and may leave the test set empty.
    """
    train = corpus.training
    seen_users = np.zeros(corpus.n_users, dtype=bool)
    seen_items = np.zeros(corpus.n_items, dtype=bool)
    seen_users[train.users] = True
    seen_items[train.items] = True
    test = corpus.testing
    keep = seen_users[test.users] & seen_items[test.items]
    filtered = SparseRatings(test.users[keep], test.items[keep], test.values[keep],
                             corpus.n_users, corpus.n_items)
    return replace(corpus, testing=filtered)


def save_corpus(corpus, path):
    """Serialize a SlicedCorpus to a versioned .npz container."""
    meta = {
        "format_version": CORPUS_FORMAT_VERSION,
        "t_total": corpus.t_total,
        "window": corpus.window,
        "n_slices": corpus.n_slices,
        "users": corpus.ids.users,
        "items": corpus.ids.items,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for name, sp in (("training", corpus.training), ("testing", corpus.testing)):
        arrays[f"{name}_u"] = sp.users
        arrays[f"{name}_i"] = sp.items
        arrays[f"{name}_r"] = sp.values
    for t, sp in enumerate(corpus.steps):
        arrays[f"step{t}_u"] = sp.users
        arrays[f"step{t}_i"] = sp.items
        arrays[f"step{t}_r"] = sp.values
    np.savez_compressed(path, **arrays)


def load_corpus(path):
    """Inverse of :func:`save_corpus`."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format_version") != CORPUS_FORMAT_VERSION:
            raise ConfigError(f"unsupported corpus format {meta.get('format_version')}")
        ids = IdMaps(meta["users"], meta["items"])

        def sp(name):
            return SparseRatings(data[f"{name}_u"], data[f"{name}_i"], data[f"{name}_r"],
                                 ids.n_users, ids.n_items)

        steps = [sp(f"step{t}") for t in range(meta["t_total"] - 1)]
        return SlicedCorpus(
            t_total=meta["t_total"],
            window=meta["window"],
            n_slices=meta["n_slices"],
            steps=steps,
            training=sp("training"),
            testing=sp("testing"),
            ids=ids,
        )
