"""Static factorization tests.

The single-triplet update is checked by hand: the error is computed
once per triplet and both factor updates consume that same error and
the pre-update partner vector.
"""

import numpy as np
import pytest

from driftmf import factorizer
from driftmf.corpus import SparseRatings
from driftmf.errors import DivergenceError
from driftmf.factorizer import (
    FactorModel,
    HyperParams,
    load_model,
    objective,
    predict,
    predict_many,
    save_model,
    train,
)


def ratings_from_triplets(triplets, n_users, n_items):
    u, i, v = zip(*triplets)
    return SparseRatings(
        np.array(u, dtype=np.int64),
        np.array(i, dtype=np.int64),
        np.array(v, dtype=np.float64),
        n_users=n_users,
        n_items=n_items,
    )


def run_single_triplet(value, alpha, reg, p0=1.0, q0=1.0):
    uf = np.array([[p0]])
    itf = np.array([[q0]])
    factorizer._sgd_epoch(
        np.array([0], dtype=np.int64),
        np.array([0], dtype=np.int64),
        np.array([value], dtype=np.float64),
        np.array([0], dtype=np.int64),
        uf,
        itf,
        alpha,
        reg,
    )
    return uf[0, 0], itf[0, 0]


class TestSingleTripletUpdate:
    def test_zero_error_is_a_fixed_point(self):
        p, q = run_single_triplet(1.0, alpha=0.5, reg=0.0)
        assert p == 1.0
        assert q == 1.0

    def test_both_updates_use_the_shared_error_snapshot(self):
        # e = 2 - 1*1 = 1; p <- 1 + 0.1*1*1 = 1.1; q uses the old p,
        # so q <- 1 + 0.1*1*1 = 1.1 as well
        p, q = run_single_triplet(2.0, alpha=0.1, reg=0.0)
        assert p == pytest.approx(1.1, abs=1e-12)
        assert q == pytest.approx(1.1, abs=1e-12)

    def test_regularization_shrinks_factors(self):
        p, q = run_single_triplet(1.0, alpha=0.1, reg=0.5)
        # e = 0, so only the decay term acts
        assert p == pytest.approx(1.0 - 0.1 * 0.5, abs=1e-12)
        assert q == pytest.approx(1.0 - 0.1 * 0.5, abs=1e-12)


class TestObjective:
    def test_empty_ratings_zero_factors(self):
        empty = SparseRatings(
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int64),
            np.array([], dtype=np.float64),
            n_users=1,
            n_items=1,
        )
        model = FactorModel(np.zeros((1, 1)), np.zeros((1, 1)))
        assert objective(empty, model, reg=0.0) == 0.0

    def test_zero_residual_no_reg(self):
        r = ratings_from_triplets([(0, 0, 3.0)], 1, 1)
        model = FactorModel(np.array([[3.0]]), np.array([[1.0]]))
        assert objective(r, model, reg=0.0) == 0.0

    def test_hand_computed_value(self):
        # residual 3 - 1 = 2, reg 2: 0.5*4 + 1*(1 + 1) = 4
        r = ratings_from_triplets([(0, 0, 3.0)], 1, 1)
        model = FactorModel(np.array([[1.0]]), np.array([[1.0]]))
        assert objective(r, model, reg=2.0) == pytest.approx(4.0)


class TestPredict:
    def test_dot_product(self):
        model = FactorModel(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]))
        assert predict(model, 0, 0) == pytest.approx(11.0)

    def test_zero_state_predicts_zero(self):
        model = FactorModel(np.zeros((1, 2)), np.array([[3.0, 4.0]]))
        assert predict(model, 0, 0) == 0.0

    def test_clamp_caps_at_ceiling(self):
        model = FactorModel(np.array([[5.17]]), np.array([[1.0]]))
        assert predict(model, 0, 0) == pytest.approx(5.17)
        assert predict(model, 0, 0, clamp=(1.0, 5.0)) == 5.0
        assert predict(model, 0, 0, clamp=(1.0, 5.0)) <= 5.0

    def test_predict_many_matches_scalar(self):
        rng = np.random.default_rng(0)
        model = FactorModel(rng.random((4, 3)), rng.random((5, 3)))
        users = np.array([0, 1, 3])
        items = np.array([2, 0, 4])
        batch = predict_many(model, users, items)
        for k in range(3):
            assert batch[k] == pytest.approx(predict(model, users[k], items[k]))

    def test_index_out_of_range(self):
        model = FactorModel(np.ones((2, 2)), np.ones((2, 2)))
        with pytest.raises(IndexError):
            predict(model, 5, 0)


def small_instance(seed=0, n_users=50, n_items=50, n_ratings=200):
    rng = np.random.default_rng(seed)
    flat = rng.choice(n_users * n_items, size=n_ratings, replace=False)
    triplets = [
        (int(f // n_items), int(f % n_items), float(rng.uniform(1, 5)))
        for f in flat
    ]
    return ratings_from_triplets(triplets, n_users, n_items)


class TestTrain:
    def test_objective_descends_without_regularization(self):
        data = small_instance()
        values = []
        for epochs in (1, 2, 5, 10, 20):
            hp = HyperParams(
                n_factors=4, learning_rate=0.005, reg=0.0, epochs=epochs, seed=3
            )
            values.append(objective(data, train(data, hp), reg=0.0))
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-9

    def test_exact_fit_on_rank_one_matrix(self):
        truth_u = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
        truth_v = np.array([1.0, 0.8, 1.2, 0.6, 1.4])
        triplets = [
            (i, j, float(truth_u[i] * truth_v[j]))
            for i in range(5)
            for j in range(5)
        ]
        data = ratings_from_triplets(triplets, 5, 5)
        hp = HyperParams(
            n_factors=1, learning_rate=0.05, reg=0.0, epochs=500, seed=1
        )
        model = train(data, hp)
        assert objective(data, model, reg=0.0) < 1e-3

    def test_same_seed_reproduces_bitwise(self):
        data = small_instance()
        hp = HyperParams(n_factors=3, epochs=5, seed=9)
        a = train(data, hp)
        b = train(data, hp)
        assert np.array_equal(a.user_factors, b.user_factors)
        assert np.array_equal(a.item_factors, b.item_factors)

    def test_unrated_user_keeps_its_random_initialization(self):
        # user 1 never appears; its row sees no updates at all
        data = ratings_from_triplets([(0, 0, 2.0), (2, 1, 3.0)], 3, 2)
        hp = HyperParams(n_factors=2, epochs=10, seed=4)
        model = train(data, hp)
        rng = np.random.default_rng(4)
        init_users = rng.random((3, 2))
        np.testing.assert_array_equal(model.user_factors[1], init_users[1])
        assert not np.array_equal(model.user_factors[0], init_users[0])

    def test_initialization_is_uniform_open_unit_interval(self):
        # only user 0 and item 0 are touched; every other row keeps the
        # uniform draw, in order: user block first, then item block
        data = ratings_from_triplets([(0, 0, 2.0)], 20, 20)
        hp = HyperParams(n_factors=8, epochs=1, seed=2)
        model = train(data, hp)
        rng = np.random.default_rng(2)
        init_u = rng.random((20, 8))
        init_q = rng.random((20, 8))
        np.testing.assert_array_equal(model.user_factors[1:], init_u[1:])
        np.testing.assert_array_equal(model.item_factors[1:], init_q[1:])
        assert init_u.min() > 0.0 and init_u.max() < 1.0

    def test_divergence_raises_and_names_the_epoch(self):
        data = small_instance()
        hp = HyperParams(n_factors=4, learning_rate=50.0, epochs=5, seed=0)
        with pytest.raises(DivergenceError) as exc:
            train(data, hp)
        assert "epoch" in str(exc.value)

    def test_empty_training_set_rejected(self):
        empty = SparseRatings(
            np.array([], dtype=np.int64),
            np.array([], dtype=np.int64),
            np.array([], dtype=np.float64),
            n_users=1,
            n_items=1,
        )
        with pytest.raises(ValueError):
            train(empty, HyperParams())


class TestHyperParams:
    def test_defaults(self):
        hp = HyperParams()
        assert hp.n_factors == 30
        assert hp.learning_rate == 0.01
        assert hp.reg == 0.02
        assert hp.epochs == 50

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_factors": 0},
            {"learning_rate": 0.0},
            {"learning_rate": -1.0},
            {"reg": -0.1},
            {"epochs": 0},
        ],
    )
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            HyperParams(**kwargs)


def test_save_load_round_trip(tmp_path):
    data = small_instance(n_users=10, n_items=8, n_ratings=30)
    hp = HyperParams(n_factors=3, epochs=3, seed=5)
    model = train(data, hp)
    path = tmp_path / "model.npz"
    save_model(model, hp, path)
    back, back_hp = load_model(path)
    assert np.array_equal(back.user_factors, model.user_factors)
    assert np.array_equal(back.item_factors, model.item_factors)
    assert back_hp == hp


def test_load_rejects_foreign_files(tmp_path):
    path = tmp_path / "not_a_model.npz"
    np.savez(path, something=np.arange(3))
    with pytest.raises(Exception):
        load_model(path)
