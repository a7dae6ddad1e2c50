import numpy as np
import pytest

from oracles import finite_difference_error
from smnet.classify import (
    ClassifierConfig,
    init_params,
    load_stream,
    predict,
    predict_proba,
    save_stream,
    stream_accuracy,
    train_classifier,
    train_stream,
)
from smnet.errors import DimensionMismatch, EmptyRosterClass, EmptyTestSet, InvalidConfig
from smnet.partition import StreamPlan


def _separable(seed=0, n=20, p=5):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.standard_normal((n, p)) + 6, rng.standard_normal((n, p)) - 6])
    y = np.repeat([3, 8], n)
    return X, y


class TestTraining:
    @pytest.mark.parametrize("kind", ["softmax", "mlp1"])
    def test_separable_fits_perfectly(self, kind):
        X, y = _separable()
        ts = train_classifier((3, 8), X, y, ClassifierConfig(kind=kind, hidden_units=8))
        assert stream_accuracy(ts, X, y) == 1.0
        curve = np.array(ts.loss_curve)
        tail = curve[len(curve) // 10:]
        assert np.all(np.diff(tail) <= 0)

    def test_single_class_roster(self):
        X, y = _separable()
        ts = train_classifier((3,), X, y, ClassifierConfig())
        np.testing.assert_array_equal(predict_proba(ts, X[:4]), np.ones((4, 1)))

    def test_bank_and_means(self):
        X, y = _separable(1)
        ts = train_classifier((8, 3), X, y, ClassifierConfig(max_epochs=5))
        np.testing.assert_array_equal(ts.member_bank[3], X[y == 3])
        for c in ts.roster:
            np.testing.assert_allclose(ts.class_mean(c), ts.member_bank[c].mean(axis=0), atol=1e-9)

    def test_deterministic(self):
        X, y = _separable(2)
        cfg = ClassifierConfig(kind="mlp1", hidden_units=6, seed=11, max_epochs=50)
        a, b = train_classifier((3, 8), X, y, cfg), train_classifier((3, 8), X, y, cfg)
        for k in a.params:
            assert a.params[k].tobytes() == b.params[k].tobytes()

    def test_empty_roster_class(self):
        X, y = _separable()
        with pytest.raises(EmptyRosterClass):
            train_classifier((3, 5), X, y, ClassifierConfig())

    def test_invalid_kind(self):
        with pytest.raises(InvalidConfig):
            ClassifierConfig(kind="svm").validate()

    def test_train_stream_uses_roster(self):
        X, y = _separable()
        plan = StreamPlan(2, {3: 0, 8: 1}, {3: 0, 8: 0}, ((3,), (8,)), {0: ((3, 100.0), (8, 100.0))})
        ts = train_stream(plan, 1, X, y, ClassifierConfig())
        assert ts.roster == (8,) and ts.stream_id == 1
        assert len(ts.member_bank[8]) == 20


class TestGradients:
    @pytest.mark.parametrize("kind", ["softmax", "mlp1"])
    def test_finite_differences(self, kind):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 4))
        y = np.array([0, 1, 2, 0, 1])
        params = init_params(ClassifierConfig(kind=kind, hidden_units=6, seed=3), 4, 3)
        params = {k: v + 0.3 * rng.standard_normal(v.shape) for k, v in params.items()}
        assert finite_difference_error(kind, params, X, y, 0.01) <= 1e-5


class TestPrediction:
    def _fitted(self, kind="softmax"):
        X, y = _separable(3)
        return train_classifier((3, 8), X, y, ClassifierConfig(kind=kind, hidden_units=8)), X, y

    def test_class_mean_predicts_its_class(self):
        ts, _, _ = self._fitted()
        for c in ts.roster:
            assert predict(ts, ts.class_mean(c))[0] == c

    def test_zero_parameters_are_uniform(self):
        ts, X, _ = self._fitted()
        ts.params = {k: np.zeros_like(v) for k, v in ts.params.items()}
        np.testing.assert_allclose(predict_proba(ts, X), 0.5)

    @pytest.mark.parametrize("kind", ["softmax", "mlp1"])
    def test_normalized(self, kind):
        ts, _, _ = self._fitted(kind)
        V = np.random.default_rng(4).standard_normal((50, 5)) * 20
        P = predict_proba(ts, V)
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)

    def test_dimension_mismatch(self):
        ts, _, _ = self._fitted()
        with pytest.raises(DimensionMismatch):
            predict_proba(ts, np.zeros(4))

    def test_uniform_model_is_at_chance(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((400, 3))
        y = rng.integers(0, 4, 400)
        ts = train_classifier((0, 1, 2, 3), X, y, ClassifierConfig(max_epochs=1))
        ts.params = {k: np.zeros_like(v) for k, v in ts.params.items()}
        acc = stream_accuracy(ts, X, y)
        # uniform output predicts roster index 0 everywhere
        assert acc == pytest.approx(np.mean(y == 0))
        assert abs(acc - 0.25) < 4 * np.sqrt(0.25 * 0.75 / 400)

    def test_empty_test_set(self):
        ts, X, _ = self._fitted()
        with pytest.raises(EmptyTestSet):
            stream_accuracy(ts, X, np.full(len(X), 99))


class TestPersistence:
    @pytest.mark.parametrize("kind", ["softmax", "mlp1"])
    def test_round_trip(self, tmp_path, kind):
        X, y = _separable(6)
        ts = train_classifier((3, 8), X, y, ClassifierConfig(kind=kind, hidden_units=4, max_epochs=20))
        save_stream(ts, tmp_path)
        back = load_stream(tmp_path, 0)
        assert back.roster == ts.roster and back.config == ts.config
        for k in ts.params:
            assert back.params[k].tobytes() == ts.params[k].tobytes()
        for c in ts.roster:
            assert back.member_bank[c].tobytes() == ts.member_bank[c].tobytes()
        np.testing.assert_array_equal(predict_proba(back, X), predict_proba(ts, X))
