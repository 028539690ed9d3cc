import numpy as np
import pytest

from utils.data import LabeledDataset
from utils.exceptions import DataFileError, DimensionMismatchError, InfeasibleError
from utils.kernel import KernelModel, save_model
from utils.waldboost import (
    Ensemble, Stump, ensemble_score, ensemble_score_batch, exponential_loss, load_ensemble,
    save_ensemble, stump_weight, train_adaboost,
)

class TestStumpWeight:
    def test_quarter_error(self):
        assert np.isclose(stump_weight(0.25), 0.5 * np.log(3.0))

    def test_zero_error_is_clamped(self):
        assert np.isclose(stump_weight(0.0), 11.5129, atol=1e-4)
        assert np.isfinite(stump_weight(1.0))

    def test_half_error(self):
        assert stump_weight(0.5) == 0.0

class TestEnsembleScore:
    @pytest.fixture
    def ensemble(self):
        return Ensemble(stumps=(Stump(0, 0.5, 1), Stump(1, -1.0, -1)), weights=(0.25, 0.5),
                        prior_log_odds=0.0, dim=2)

    def test_values(self, ensemble):
        # F = 0.25 * (+1) + 0.5 * (-1)
        assert ensemble_score(ensemble, np.array([1.0, 0.0])) == -0.5
        # F = 0.25 * (-1) + 0.5 * (+1)
        assert ensemble_score(ensemble, np.array([0.0, -2.0])) == 0.5

    def test_batch_matches_scalar(self, ensemble):
        X = np.random.default_rng(0).normal(size=(50, 2))
        assert np.array_equal(ensemble_score_batch(ensemble, X), [ensemble_score(ensemble, x) for x in X])

    def test_prior_offset(self):
        ensemble = Ensemble(stumps=(Stump(0, 0.0, 1),), weights=(1.0,), prior_log_odds=np.log(0.25), dim=1)
        assert np.isclose(ensemble_score(ensemble, np.array([1.0])), 2.0 + np.log(0.25))

    def test_dimension_mismatch(self, ensemble):
        with pytest.raises(DimensionMismatchError):
            ensemble_score(ensemble, np.zeros(3))

    def test_feature_index_checked(self):
        with pytest.raises(DimensionMismatchError):
            Ensemble(stumps=(Stump(2, 0.0, 1),), weights=(1.0,), prior_log_odds=0.0, dim=2)

class TestTraining:
    def test_separable_data(self):
        data = LabeledDataset(np.array([[0.0], [1.0]]), np.array([[2.0], [3.0]]))
        ensemble = train_adaboost(data, rounds=1, seed=0)
        assert ensemble.stumps[0] == Stump(0, 1.5, 1)
        assert np.isclose(ensemble.weights[0], 11.5129, atol=1e-4)
        assert ensemble_score(ensemble, np.array([3.0])) > 0 > ensemble_score(ensemble, np.array([0.0]))

    def test_loss_non_increasing(self, small_dataset):
        ensemble = train_adaboost(small_dataset, rounds=200, seed=0)
        losses = np.array(ensemble.loss_history)
        assert len(losses) == len(ensemble.stumps) > 100
        assert np.all(np.diff(losses) <= 1e-12)
        assert np.isclose(losses[-1], exponential_loss(ensemble, small_dataset))

    def test_prior_log_odds(self, small_dataset):
        ensemble = train_adaboost(small_dataset, rounds=3, seed=0, prior0=0.2)
        assert np.isclose(ensemble.prior_log_odds, np.log(0.25))

    def test_deterministic(self, small_dataset):
        a = train_adaboost(small_dataset, rounds=10, seed=0)
        b = train_adaboost(small_dataset, rounds=10, seed=0)
        assert a.stumps == b.stumps and a.weights == b.weights

    def test_indistinguishable_classes(self):
        data = LabeledDataset(np.array([[1.0], [1.0]]), np.array([[1.0], [1.0]]))
        with pytest.raises(InfeasibleError):
            train_adaboost(data, rounds=5, seed=0)

class TestPersistence:
    def test_roundtrip(self, tmp_path, small_dataset):
        ensemble = train_adaboost(small_dataset, rounds=5, seed=0)
        path = str(tmp_path / "model_waldboost.json")
        save_ensemble(ensemble, path)
        loaded = load_ensemble(path)
        X = small_dataset.class1[:20]
        assert np.array_equal(ensemble_score_batch(loaded, X), ensemble_score_batch(ensemble, X))

    def test_wrong_kind(self, tmp_path):
        path = str(tmp_path / "model.json")
        save_model(KernelModel(np.zeros((1, 1)), 1.0, np.ones(1)), path)
        with pytest.raises(DataFileError):
            load_ensemble(path)
