import numpy as np
import pytest

from utils.data import LabeledDataset
from utils.exceptions import ConfigError, DataFileError, DimensionMismatchError
from utils.kernel import (
    KernelModel, feature_matrix, feature_vec, gauss_kernel, kernel_matrix, load_centers, load_model,
    log_ratio, pick_centers, save_centers, save_model,
)

class TestGaussKernel:
    def test_identical_points(self):
        assert gauss_kernel(np.array([0.3, -1.2]), np.array([0.3, -1.2]), 0.7) == 1.0

    def test_sigma_squared_denominator(self):
        value = gauss_kernel(np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.sqrt(2.0))
        assert np.isclose(value, np.exp(-1.0), rtol=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            x, y = rng.normal(size=3), rng.normal(size=3)
            assert gauss_kernel(x, y, 1.3) == gauss_kernel(y, x, 1.3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            gauss_kernel(np.zeros(2), np.zeros(3), 1.0)

    def test_invalid_sigma(self):
        with pytest.raises(ConfigError):
            gauss_kernel(np.zeros(2), np.zeros(2), 0.0)

class TestFeatures:
    def test_center_hit(self):
        centers = np.random.default_rng(1).normal(size=(5, 2))
        vec = feature_vec(centers[2], centers, 0.8)
        assert vec[2] == 1.0
        assert np.all((vec > 0) & (vec <= 1))

    def test_batched_matches_scalar(self):
        rng = np.random.default_rng(2)
        X, centers = rng.normal(size=(20, 3)), rng.normal(size=(6, 3))
        Phi = feature_matrix(X, centers, 1.1)
        scalar = np.array([[gauss_kernel(x, c, 1.1) for c in centers] for x in X])
        assert np.allclose(Phi, scalar, rtol=0, atol=1e-14)

class TestKernelMatrix:
    def test_single_center(self):
        assert np.array_equal(kernel_matrix(np.array([[0.5, 0.5]]), 1.0), [[1.0]])

    def test_two_centers(self):
        K = kernel_matrix(np.array([[0.0, 0.0], [1.0, 1.0]]), np.sqrt(2.0))
        assert np.isclose(K[0, 1], np.exp(-1.0), rtol=1e-12)
        assert np.array_equal(K, K.T)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            K = kernel_matrix(rng.normal(size=(10, 2)), 0.9)
            assert np.min(np.linalg.eigvalsh(K)) >= -1e-10
            assert np.all(np.diag(K) == 1.0)

class TestPickCenters:
    def test_whole_pool(self, small_dataset):
        centers = pick_centers(small_dataset, small_dataset.m + small_dataset.n, 4)
        pooled = small_dataset.pooled()
        assert np.array_equal(centers[np.lexsort(centers.T)], pooled[np.lexsort(pooled.T)])

    def test_too_many(self, small_dataset):
        with pytest.raises(ConfigError):
            pick_centers(small_dataset, 401, 0)

    def test_distinct_by_index(self):
        data = LabeledDataset(np.zeros((3, 1)), np.zeros((2, 1)))
        assert pick_centers(data, 5, 0).shape == (5, 1)

class TestLogRatio:
    def test_zero_alpha(self):
        model = KernelModel(np.array([[0.0, 0.0], [1.0, 1.0]]), 1.0, np.zeros(2))
        assert log_ratio(model, np.array([0.3, 0.4])) == 0.0

    def test_single_center(self):
        model = KernelModel(np.array([[0.2, 0.1]]), 1.0, np.array([2.5]))
        assert log_ratio(model, np.array([0.2, 0.1])) == 2.5

    def test_two_centers(self):
        model = KernelModel(np.array([[0.0, 0.0], [1.0, 1.0]]), np.sqrt(2.0), np.array([-1.0, 1.0]))
        assert np.isclose(log_ratio(model, np.array([0.0, 0.0])), -1.0 + np.exp(-1.0), rtol=1e-12)

    def test_linear_in_alpha(self):
        rng = np.random.default_rng(5)
        centers = rng.normal(size=(4, 2))
        a1, a2 = rng.normal(size=4), rng.normal(size=4)
        x = rng.normal(size=2)
        total = log_ratio(KernelModel(centers, 1.0, a1 + a2), x)
        parts = log_ratio(KernelModel(centers, 1.0, a1), x) + log_ratio(KernelModel(centers, 1.0, a2), x)
        assert abs(total - parts) <= 1e-12

    def test_dimension_mismatch(self):
        model = KernelModel(np.zeros((2, 2)), 1.0, np.ones(2))
        with pytest.raises(DimensionMismatchError):
            log_ratio(model, np.zeros(3))

    def test_alpha_length_checked(self):
        with pytest.raises(DimensionMismatchError):
            KernelModel(np.zeros((2, 2)), 1.0, np.ones(3))

class TestPersistence:
    def test_model_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        model = KernelModel(rng.normal(size=(3, 2)), 0.7, rng.normal(size=3), {"method": "wkdrf"})
        path = str(tmp_path / "model.json")
        save_model(model, path)
        loaded = load_model(path)
        assert np.array_equal(loaded.alpha, model.alpha)
        assert np.array_equal(loaded.centers, model.centers)
        assert loaded.sigma == model.sigma and loaded.meta["method"] == "wkdrf"

    def test_centers_from_model_file(self, tmp_path):
        centers = np.array([[1.0, 2.0], [3.0, 4.0]])
        model_path = str(tmp_path / "m.json")
        save_model(KernelModel(centers, 1.0, np.ones(2)), model_path)
        assert np.array_equal(load_centers(model_path), centers)
        centers_path = str(tmp_path / "c.json")
        save_centers(centers, centers_path)
        assert np.array_equal(load_centers(centers_path), centers)

    def test_missing_model(self, tmp_path):
        with pytest.raises(DataFileError):
            load_model(str(tmp_path / "none.json"))
