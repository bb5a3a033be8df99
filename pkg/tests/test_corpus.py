import numpy as np
import pytest

from driftmf import corpus
from driftmf.corpus import (
    RatingLog,
    SparseRatings,
    filter_test_set,
    ingest,
    load_corpus,
    save_corpus,
    slice_and_window,
)
from driftmf.errors import ConfigError, EmptyCorpusError, ParseError


def write(tmp_path, text, name="logs.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def logs_with_timestamps(ts_list):
    return [
        RatingLog(user=f"u{k}", item=f"i{k}", rating=1.0, timestamp=ts)
        for k, ts in enumerate(ts_list)
    ]


class TestIngest:
    def test_csv_line_maps_fields_directly(self, tmp_path):
        p = write(tmp_path, "42,7,4.5,1300000000\n")
        (log,) = ingest(p)
        assert log.user == "42"
        assert log.item == "7"
        assert log.rating == 4.5
        assert log.timestamp == 1300000000

    def test_header_row_is_skipped(self, tmp_path):
        p = write(tmp_path, "user,item,rating,timestamp\n1,2,3.0,4\n")
        logs = ingest(p)
        assert len(logs) == 1
        assert logs[0].user == "1"

    def test_tsv_format(self, tmp_path):
        p = write(tmp_path, "a\tb\t2.5\t9\n", name="logs.tsv")
        (log,) = ingest(p, fmt="tsv")
        assert (log.user, log.item, log.rating, log.timestamp) == ("a", "b", 2.5, 9)

    def test_empty_file_raises(self, tmp_path):
        p = write(tmp_path, "")
        with pytest.raises(EmptyCorpusError):
            ingest(p)

    def test_header_only_file_raises(self, tmp_path):
        p = write(tmp_path, "user,item,rating,timestamp\n")
        with pytest.raises(EmptyCorpusError):
            ingest(p)

    def test_malformed_line_names_line_number(self, tmp_path):
        p = write(tmp_path, "1,2,3.0,4\n1,2,not-a-number,5\n")
        with pytest.raises(ParseError) as exc:
            ingest(p)
        assert exc.value.line_no == 2

    def test_wrong_field_count_is_a_parse_error(self, tmp_path):
        p = write(tmp_path, "1,2,3.0\n")
        with pytest.raises(ParseError):
            ingest(p)

    def test_duplicate_pair_keeps_latest_timestamp(self, tmp_path):
        p = write(tmp_path, "u,i,1.0,10\nu,i,2.0,20\nu,j,5.0,15\n")
        logs = ingest(p)
        by_pair = {(l.user, l.item): l for l in logs}
        assert len(logs) == 2
        assert by_pair[("u", "i")].rating == 2.0
        assert by_pair[("u", "i")].timestamp == 20

    def test_unknown_format_rejected(self, tmp_path):
        p = write(tmp_path, "1,2,3,4\n")
        with pytest.raises(ConfigError):
            ingest(p, fmt="parquet")


class TestSliceAndWindow:
    def test_ten_logs_ten_slices_window_five(self):
        # slices hold one log each; step t merges slices t..t+4
        logs = logs_with_timestamps(list(range(10)))
        c = slice_and_window(logs, n_slices=10, window=5)
        assert c.t_total == 6
        assert len(c.steps) == 5
        ts_of = {f"u{k}": k for k in range(10)}
        for t, step in enumerate(c.steps):
            got = sorted(ts_of[c.ids.users[u]] for u in step.users)
            assert got == list(range(t, t + 5))
        assert [c.ids.users[u] for u in c.testing.users] == ["u9"]

    def test_smallest_legal_case(self):
        logs = logs_with_timestamps([1, 2])
        c = slice_and_window(logs, n_slices=2, window=1)
        assert len(c.steps) == 1
        assert c.steps[0].n_ratings == 1
        assert c.testing.n_ratings == 1

    def test_window_must_be_below_slice_count(self):
        logs = logs_with_timestamps(range(5))
        with pytest.raises(ConfigError):
            slice_and_window(logs, n_slices=5, window=5)
        with pytest.raises(ConfigError):
            slice_and_window(logs, n_slices=1, window=1)

    def test_remainder_goes_to_earlier_slices(self):
        # 7 logs over 3 slices -> sizes 3, 2, 2
        logs = logs_with_timestamps(range(7))
        c = slice_and_window(logs, n_slices=3, window=1)
        assert c.steps[0].n_ratings == 3
        assert c.steps[1].n_ratings == 2
        assert c.testing.n_ratings == 2

    def test_slices_are_chronological(self):
        rng = np.random.default_rng(0)
        ts = rng.permutation(100)
        logs = logs_with_timestamps(ts.tolist())
        c = slice_and_window(logs, n_slices=5, window=1)
        ts_of = {f"u{k}": int(t) for k, t in enumerate(ts)}
        blocks = [
            [ts_of[c.ids.users[u]] for u in step.users] for step in c.steps
        ]
        blocks.append([ts_of[c.ids.users[u]] for u in c.testing.users])
        for a, b in zip(blocks, blocks[1:]):
            assert max(a) <= min(b)

    def test_partition_recovers_every_log_once(self):
        logs = logs_with_timestamps(range(20))
        c = slice_and_window(logs, n_slices=4, window=1)
        seen = []
        for step in c.steps:
            seen += [c.ids.users[u] for u in step.users]
        seen += [c.ids.users[u] for u in c.testing.users]
        assert sorted(seen) == sorted(l.user for l in logs)

    def test_consecutive_steps_share_window_minus_one_slices(self):
        logs = logs_with_timestamps(range(12))
        c = slice_and_window(logs, n_slices=6, window=3)
        for a, b in zip(c.steps, c.steps[1:]):
            shared = a.pair_set() & b.pair_set()
            # each slice holds 2 logs here, so 2 shared slices = 4 pairs
            assert len(shared) == 4

    def test_equal_duration_mode_splits_by_timestamp_span(self):
        # bursty data: nine logs at t=0, one at t=100
        logs = logs_with_timestamps([0] * 9 + [100])
        c = slice_and_window(logs, n_slices=2, window=1, equal_duration=True)
        assert c.steps[0].n_ratings == 9
        assert c.testing.n_ratings == 1

    def test_ids_assigned_in_first_appearance_order(self):
        logs = [
            RatingLog(user="w", item="x", rating=1.0, timestamp=3),
            RatingLog(user="v", item="y", rating=1.0, timestamp=1),
            RatingLog(user="w", item="z", rating=1.0, timestamp=2),
        ]
        c = slice_and_window(logs, n_slices=3, window=1)
        # chronological order is v(1), w(2), w(3); test slice is the ts=3 log
        assert c.ids.users == ["v", "w"]
        assert c.ids.items == ["y", "z", "x"]


class TestFilterTestSet:
    def build(self, train_pairs, test_pairs):
        logs = []
        for ts, (u, i) in enumerate(train_pairs):
            logs.append(RatingLog(user=u, item=i, rating=1.0, timestamp=ts))
        for ts, (u, i) in enumerate(test_pairs):
            logs.append(
                RatingLog(user=u, item=i, rating=1.0, timestamp=1000 + ts)
            )
        return slice_and_window(logs, n_slices=2, window=1)

    def test_unseen_user_dropped_seen_pair_kept(self):
        c = self.build(
            [("u1", "i1"), ("u2", "i2")],
            [("u1", "i2"), ("u3", "i1")],
        )
        f = filter_test_set(c)
        kept = {
            (f.ids.users[u], f.ids.items[i])
            for u, i in zip(f.testing.users, f.testing.items)
        }
        assert kept == {("u1", "i2")}

    def test_can_empty_the_test_set(self):
        c = self.build([("u1", "i1")], [("u1", "i2"), ("u2", "i1")])
        f = filter_test_set(c)
        assert f.testing.n_ratings == 0

    def test_idempotent(self):
        c = self.build(
            [("u1", "i1"), ("u2", "i2")],
            [("u1", "i2"), ("u3", "i1")],
        )
        once = filter_test_set(c)
        twice = filter_test_set(once)
        assert twice.testing.n_ratings == once.testing.n_ratings
        assert np.array_equal(twice.testing.users, once.testing.users)
        assert np.array_equal(twice.testing.items, once.testing.items)

    def test_training_untouched(self):
        c = self.build([("u1", "i1")], [("u2", "i2")])
        f = filter_test_set(c)
        assert f.training.n_ratings == c.training.n_ratings


class TestSparseRatings:
    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError):
            SparseRatings(
                np.array([0, 0]),
                np.array([1, 1]),
                np.array([1.0, 2.0]),
                n_users=2,
                n_items=2,
            )

    def test_user_slice_returns_that_users_ratings(self):
        sr = SparseRatings(
            np.array([1, 0, 1]),
            np.array([0, 1, 2]),
            np.array([5.0, 3.0, 4.0]),
            n_users=3,
            n_items=3,
        )
        items, values = sr.user_slice(1)
        assert sorted(items.tolist()) == [0, 2]
        items0, _ = sr.user_slice(2)
        assert items0.size == 0

    def test_empty_is_allowed(self):
        sr = SparseRatings(
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int64),
            np.array([], dtype=np.float64),
            n_users=4,
            n_items=4,
        )
        assert sr.n_ratings == 0


def test_save_load_round_trip(tmp_path):
    logs = logs_with_timestamps(range(30))
    c = slice_and_window(logs, n_slices=5, window=2)
    path = tmp_path / "corpus.npz"
    save_corpus(c, path)
    back = load_corpus(path)
    assert back.t_total == c.t_total
    assert back.window == c.window
    assert back.ids.users == c.ids.users
    assert back.ids.items == c.ids.items
    assert len(back.steps) == len(c.steps)
    for a, b in zip(back.steps, c.steps):
        assert np.array_equal(a.users, b.users)
        assert np.array_equal(a.items, b.items)
        assert np.array_equal(a.values, b.values)
    assert np.array_equal(back.testing.values, c.testing.values)


def test_chronological_is_stable_on_timestamp_ties():
    logs = [
        RatingLog(user="a", item="x", rating=1.0, timestamp=5),
        RatingLog(user="b", item="y", rating=2.0, timestamp=5),
        RatingLog(user="c", item="z", rating=3.0, timestamp=1),
    ]
    ordered = corpus.chronological(logs)
    assert [l.user for l in ordered] == ["c", "a", "b"]
