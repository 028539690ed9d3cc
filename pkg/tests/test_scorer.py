import numpy as np
import pytest

from utils.data import LabeledDataset, gen_mixture_samples
from utils.exceptions import DataFileError, DimensionMismatchError
from utils.kernel import KernelModel, log_ratio, save_model
from utils.scorer import (
    ConstantScorer, EnsembleScorer, ModelScorer, ScaledScorer, ShiftedScorer, load_scorer, model_scorer,
    normalization_diagnostics, oracle_scorer,
)
from utils.waldboost import Ensemble, Stump, save_ensemble

class TestOracle:
    def test_values_at_known_points(self, specs):
        oracle = oracle_scorer(*specs)
        # log(0.5 (e^-2 + e^-0.5)) и log(0.5 e^2 (1 + e^-4.5))
        assert np.isclose(oracle.score(np.array([1.0, 1.0])), -0.99177, atol=1e-5)
        assert np.isclose(oracle.score(np.array([0.0, 0.0])), 1.31797, atol=1e-5)

    def test_batch_matches_scalar(self, specs, small_dataset):
        oracle = oracle_scorer(*specs)
        X = small_dataset.class0[:10]
        assert np.allclose(oracle.score_batch(X), [oracle.score(x) for x in X], rtol=0, atol=1e-12)

    def test_dimension_mismatch(self, specs):
        with pytest.raises(DimensionMismatchError):
            oracle_scorer(*specs).score(np.zeros(3))

    def test_oracle_is_normalized(self, specs):
        spec0, spec1 = specs
        data = LabeledDataset(gen_mixture_samples(spec0, 200000, 1), gen_mixture_samples(spec1, 200000, 2))
        report = normalization_diagnostics(oracle_scorer(*specs), data)
        assert abs(report.mean_ratio_h0 - 1.0) < 0.05
        assert abs(report.mean_invratio_h1 - 1.0) < 0.05

class TestNormalization:
    def test_constant_scorer(self, small_dataset):
        report = normalization_diagnostics(ConstantScorer(5.0), small_dataset)
        assert np.isclose(report.mean_ratio_h0, np.exp(5.0), rtol=1e-12)
        assert np.isclose(report.mean_invratio_h1, np.exp(-5.0), rtol=1e-12)
        c0, c1 = report.residuals
        assert np.isclose(c0, np.exp(5.0) - 1.0) and np.isclose(c1, np.exp(-5.0) - 1.0)

    def test_jensen_consistency(self, specs, small_dataset):
        model = KernelModel(np.array([[0.0, 0.0], [1.0, 1.0], [1.5, 1.5]]), 0.8, np.array([1.5, -2.0, 0.7]))
        oracle = oracle_scorer(*specs)
        for scorer in (oracle, ScaledScorer(oracle, 3.0), model_scorer(model), ConstantScorer(-0.3)):
            report = normalization_diagnostics(scorer, small_dataset)
            mean0 = float(np.mean(scorer.score_batch(small_dataset.class0)))
            mean1 = float(np.mean(scorer.score_batch(small_dataset.class1)))
            assert report.mean_ratio_h0 >= np.exp(mean0) * (1 - 1e-12)
            assert report.mean_invratio_h1 >= np.exp(-mean1) * (1 - 1e-12)

    def test_overflow_gives_inf(self, small_dataset):
        report = normalization_diagnostics(ConstantScorer(1000.0), small_dataset)
        assert report.mean_ratio_h0 == np.inf
        assert report.mean_invratio_h1 == 0.0

class TestWrappers:
    def test_scaled_and_shifted(self, specs):
        oracle = oracle_scorer(*specs)
        x = np.array([0.2, 0.7])
        assert np.isclose(ScaledScorer(oracle, 2.0).score(x), 2.0 * oracle.score(x))
        assert np.isclose(ShiftedScorer(oracle, -0.5).score(x), oracle.score(x) - 0.5)
        assert ScaledScorer(oracle, 2.0).name == "oracle*2"

    def test_model_scorer(self):
        model = KernelModel(np.array([[0.0, 0.0], [1.0, 1.0]]), 1.0, np.array([-1.0, 2.0]), {"method": "wkdrf"})
        scorer = ModelScorer(model)
        X = np.array([[0.0, 0.0], [0.5, 0.5], [2.0, -1.0]])
        assert np.allclose(scorer.score_batch(X), [scorer.score(x) for x in X], rtol=0, atol=1e-12)
        assert scorer.name == "wkdrf"
        with pytest.raises(DimensionMismatchError):
            scorer.score_batch(np.zeros((2, 3)))

    def test_model_scorer_equals_log_ratio(self):
        rng = np.random.default_rng(3)
        model = KernelModel(rng.normal(size=(6, 2)), 0.7, rng.normal(size=6), {"method": "klfit"})
        scorer = model_scorer(model)
        assert scorer.name == "klfit"
        for x in rng.normal(scale=2.0, size=(1000, 2)):
            assert scorer.score(x) == log_ratio(model, x)
        assert model_scorer(model, name="custom").name == "custom"

class TestLoadScorer:
    def test_kernel_model(self, tmp_path):
        model = KernelModel(np.array([[0.0], [1.0]]), 0.5, np.array([1.0, -1.0]), {"method": "klfit"})
        path = str(tmp_path / "model_klfit.json")
        save_model(model, path)
        scorer = load_scorer(path)
        assert scorer.name == "klfit"
        assert np.isclose(scorer.score(np.array([0.0])), 1.0 - np.exp(-4.0))

    def test_ensemble(self, tmp_path):
        ensemble = Ensemble(stumps=(Stump(0, 0.5, 1),), weights=(0.25,), prior_log_odds=0.0, dim=1)
        path = str(tmp_path / "model_waldboost.json")
        save_ensemble(ensemble, path)
        scorer = load_scorer(path)
        assert isinstance(scorer, EnsembleScorer)
        assert scorer.score(np.array([1.0])) == 0.5
        assert scorer.score(np.array([0.0])) == -0.5

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"kind": "forest"}', encoding="utf-8")
        with pytest.raises(DataFileError):
            load_scorer(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileError):
            load_scorer(str(tmp_path / "missing.json"))
