import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smnet.errors import DimensionMismatch, InsufficientData, TargetBelowObserved
from smnet.feature_store import ClipRecord
from smnet.preprocess import (
    EqualizationConfig,
    PcaModel,
    equalize,
    equalize_many,
    fit_pca,
    project,
    reconstruct,
)


def _clip(rows):
    seg = np.asarray(rows, dtype=np.float32)
    return ClipRecord("c", "v", 0, "train", seg, 16 * len(seg))


class TestEqualize:
    def test_identity_at_target(self):
        rows = [[1, 2], [3, 4], [5, 6]]
        np.testing.assert_array_equal(equalize(_clip(rows), 3), np.ravel(rows))

    def test_cyclic_repetition(self):
        a, b = [1.0, 2.0], [3.0, 4.0]
        # hand trace: rows i mod 2 for i = 0..4 -> a b a b a
        np.testing.assert_array_equal(equalize(_clip([a, b]), 5), np.array(a + b + a + b + a))

    def test_target_below_observed(self):
        with pytest.raises(TargetBelowObserved):
            equalize(_clip(np.zeros((4, 2))), 2)

    def test_auto_target_is_training_max(self):
        clips = [_clip(np.zeros((s, 2))) for s in (1, 4, 2)]
        assert EqualizationConfig("auto").resolve(clips) == 4

    def test_fixed_target_below_max_rejected(self):
        clips = [_clip(np.zeros((s, 2))) for s in (1, 4)]
        with pytest.raises(TargetBelowObserved):
            EqualizationConfig(3).resolve(clips)

    @given(st.lists(st.integers(1, 6), min_size=1, max_size=8), st.integers(0, 4))
    def test_constant_output_length(self, lengths, extra):
        clips = [_clip(np.ones((s, 3))) for s in lengths]
        target = EqualizationConfig("auto").resolve(clips) + extra
        assert {equalize(c, target).size for c in clips} == {3 * target}


def _random_data(seed, n=40, d=10):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)) @ rng.standard_normal((d, d))


class TestPca:
    def test_rank_limited(self):
        rng = np.random.default_rng(0)
        basis = rng.standard_normal((2, 10))
        X = rng.standard_normal((30, 2)) @ basis + rng.standard_normal(10)
        model = fit_pca(X, 5)
        assert model.n_components == 2
        assert np.all(model.explained_variance > 0)

    def test_orthonormal_and_sorted(self):
        model = fit_pca(_random_data(1), 10)
        gram = model.components @ model.components.T
        assert np.abs(gram - np.eye(model.n_components)).max() <= 1e-8
        assert np.all(np.diff(model.explained_variance) <= 0)

    def test_sign_convention(self):
        model = fit_pca(_random_data(2), 6)
        pivots = np.argmax(np.abs(model.components), axis=1)
        assert np.all(model.components[np.arange(6), pivots] > 0)

    def test_repeat_fit_identical(self):
        X = _random_data(3)
        a, b = fit_pca(X, 10), fit_pca(X.copy(), 10)
        assert a.components.tobytes() == b.components.tobytes()

    def test_projected_variance_matches(self):
        X = _random_data(4)
        model = fit_pca(X, 10)
        Z = project(model, X)
        np.testing.assert_allclose(Z.var(axis=0, ddof=1), model.explained_variance, rtol=1e-6)

    def test_full_rank_preserves_pairwise_distances(self):
        X = _random_data(5)
        Z = project(fit_pca(X, X.shape[1]), X)
        dx = ((X[:, None] - X[None]) ** 2).sum(-1)
        dz = ((Z[:, None] - Z[None]) ** 2).sum(-1)
        off = ~np.eye(len(X), dtype=bool)
        assert np.max(np.abs(dz[off] - dx[off]) / dx[off]) <= 1e-6

    def test_mean_projects_to_zero(self):
        model = fit_pca(_random_data(6), 4)
        np.testing.assert_allclose(project(model, model.mean), 0.0, atol=1e-12)

    def test_component_projects_to_unit_vector(self):
        model = fit_pca(_random_data(7), 4)
        np.testing.assert_allclose(project(model, model.mean + model.components[0]),
                                   np.eye(4)[0], atol=1e-12)

    def test_reconstruction(self):
        X = _random_data(8)
        model = fit_pca(X, 10)
        v = np.random.default_rng(9).standard_normal(10) * 3
        rec = reconstruct(model, project(model, v))
        assert np.linalg.norm(rec - v) / np.linalg.norm(v) <= 1e-6

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
    def test_linear_on_centered_inputs(self, alpha, beta, seed):
        model = fit_pca(_random_data(10), 10)
        rng = np.random.default_rng(seed)
        u, w = rng.standard_normal((2, 10))
        lhs = project(model, model.mean + alpha * u + beta * w)
        rhs = alpha * project(model, model.mean + u) + beta * project(model, model.mean + w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(alpha) + abs(beta)) * 10)

    def test_dimension_mismatch(self):
        model = fit_pca(_random_data(11), 3)
        with pytest.raises(DimensionMismatch):
            project(model, np.zeros(7))

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_pca(np.zeros((1, 4)), 2)

    def test_persistence_round_trip(self, tmp_path):
        model = fit_pca(_random_data(12), 5)
        model.save(tmp_path / "m.smnp")
        raw = (tmp_path / "m.smnp").read_bytes()
        assert raw[:4] == b"SMNP"
        loaded = PcaModel.load(tmp_path / "m.smnp")
        assert loaded.components.tobytes() == model.components.tobytes()
        assert loaded.mean.tobytes() == model.mean.tobytes()
        assert loaded.explained_variance.tobytes() == model.explained_variance.tobytes()

    def test_fits_flattened_equalized_clips(self):
        clips = [_clip(np.random.default_rng(i).standard_normal((1 + i % 3, 4))) for i in range(12)]
        model = fit_pca(equalize_many(clips, 3), 100)
        assert model.input_dim == 12
