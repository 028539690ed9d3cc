import numpy as np
import pytest

from utils.data import MixtureSource, gen_mixture_samples, sample_stream
from utils.exceptions import ConfigError, SprtAbortError
from utils.scorer import ConstantScorer, ScaledScorer, Scorer, oracle_scorer
from utils.seeding import make_rng
from utils.sprt import (
    Decision, ErrorTargets, Thresholds, cost_brackets, errors_from_thresholds, record_scores_sprt,
    run_sprt, run_trials, theoretical_cost, thresholds_from_errors, wald_identity_check,
)

class FirstCoordinate(Scorer):
    """score(x) = x[0]: сумма оценок равна сумме первых координат."""

    def score_batch(self, X):
        return np.atleast_2d(np.asarray(X, dtype=float))[:, 0]

    @property
    def descriptor(self):
        return {"name": "first"}

SYMMETRIC = thresholds_from_errors(ErrorTargets(0.1, 0.1))

class TestThresholds:
    def test_symmetric(self):
        assert np.isclose(SYMMETRIC.a, -2.197225, atol=1e-6)
        assert np.isclose(SYMMETRIC.b, 2.197225, atol=1e-6)

    def test_asymmetric(self):
        t = thresholds_from_errors(ErrorTargets(0.01, 0.05))
        assert np.isclose(t.a, -2.985682, atol=1e-6)
        assert np.isclose(t.b, 4.553877, atol=1e-6)

    def test_roundtrip_grid(self):
        grid = np.linspace(0.01, 0.45, 20)
        for pf in grid:
            for pm in grid:
                back = errors_from_thresholds(thresholds_from_errors(ErrorTargets(pf, pm)))
                assert abs(back.pf - pf) <= 1e-12 and abs(back.pm - pm) <= 1e-12

    @pytest.mark.parametrize("pf, pm", [(0.0, 0.1), (0.5, 0.1), (0.1, 0.6), (-0.1, 0.1)])
    def test_invalid_targets(self, pf, pm):
        with pytest.raises(ConfigError):
            ErrorTargets(pf, pm)

    def test_invalid_thresholds(self):
        with pytest.raises(ConfigError):
            Thresholds(a=0.5, b=2.0)

class TestTheoreticalCost:
    def test_symmetric_unit_divergences(self):
        cost = theoretical_cost(ErrorTargets(0.1, 0.1), 1.0, 1.0)
        # 0.8 log 9
        assert np.isclose(cost.n0, 1.757780, atol=1e-6)
        assert np.isclose(cost.n1, 1.757780, atol=1e-6)
        assert np.isclose(cost.total, 1.757780, atol=1e-6)

    def test_asymmetric_bracket(self):
        bracket0, bracket1 = cost_brackets(ErrorTargets(0.01, 0.05))
        assert np.isclose(bracket1, 4.176899, atol=1e-5)
        assert bracket0 > 0

    def test_scales_inversely_with_divergence(self):
        targets = ErrorTargets(0.05, 0.05)
        one = theoretical_cost(targets, 1.0, 1.0)
        two = theoretical_cost(targets, 2.0, 2.0)
        assert np.isclose(one.total, 2.0 * two.total)

    def test_priors_weight_the_sum(self):
        cost = theoretical_cost(ErrorTargets(0.1, 0.2), 0.5, 2.0, pi0=0.3)
        assert np.isclose(cost.total, 0.3 * cost.n0 + 0.7 * cost.n1)

    def test_non_positive_divergence(self):
        with pytest.raises(ConfigError):
            theoretical_cost(ErrorTargets(0.1, 0.1), 0.0, 1.0)

class TestRunSprt:
    def test_constant_positive(self, unit_spec):
        out = run_sprt(ConstantScorer(1.0), sample_stream(unit_spec, 0), SYMMETRIC, 100)
        assert (out.decision, out.n_samples, out.truncated) == (Decision.H1, 3, False)
        assert out.final_stat == 3.0

    def test_constant_negative(self, unit_spec):
        out = run_sprt(ConstantScorer(-1.0), sample_stream(unit_spec, 0), SYMMETRIC, 100)
        assert (out.decision, out.n_samples) == (Decision.H0, 3)

    def test_truncation_at_zero(self, unit_spec):
        out = run_sprt(ConstantScorer(0.0), sample_stream(unit_spec, 0), SYMMETRIC, 50)
        assert (out.decision, out.n_samples, out.truncated) == (Decision.H0, 50, True)

    def test_truncation_by_sign(self, unit_spec):
        out = run_sprt(ConstantScorer(0.001), sample_stream(unit_spec, 0), SYMMETRIC, 40)
        assert out.truncated and out.decision == Decision.H1

    def test_boundaries_inclusive(self):
        t = Thresholds(a=-1.0, b=2.0)
        assert record_scores_sprt([1.0, 1.0, 5.0], t).n_samples == 2
        assert record_scores_sprt([-0.5, -0.5, 5.0], t).decision == Decision.H0

    def test_consumes_exactly_n(self, unit_spec):
        stream = sample_stream(unit_spec, 3)
        out = run_sprt(ConstantScorer(0.5), stream, SYMMETRIC, 1000)
        assert out.n_samples == 5
        assert stream.consumed == 5
        rest = stream.take(10)
        assert np.array_equal(rest, gen_mixture_samples(unit_spec, 15, 3)[5:])

    def test_non_finite_aborts(self, unit_spec):
        with pytest.raises(SprtAbortError):
            run_sprt(ConstantScorer(np.nan), sample_stream(unit_spec, 0), SYMMETRIC, 100)

    def test_iterable_input(self):
        rows = [np.array([0.7])] * 10
        out = run_sprt(FirstCoordinate(), iter(rows), SYMMETRIC, 100)
        assert (out.decision, out.n_samples) == (Decision.H1, 4)

    def test_exhausted_iterable(self):
        with pytest.raises(SprtAbortError):
            run_sprt(ConstantScorer(0.0), [np.zeros(1)] * 3, SYMMETRIC, 50)

    def test_invalid_n_max(self, unit_spec):
        with pytest.raises(ConfigError):
            run_sprt(ConstantScorer(1.0), sample_stream(unit_spec, 0), SYMMETRIC, 0)

    def test_matches_recorded_scores(self, unit_spec):
        t = Thresholds(a=-8.0, b=9.0)
        for seed in range(30):
            streamed = run_sprt(FirstCoordinate(), sample_stream(unit_spec, seed), t, 2000)
            recorded = record_scores_sprt(gen_mixture_samples(unit_spec, 2000, seed)[:, 0], t)
            assert streamed.decision == recorded.decision
            assert streamed.n_samples == recorded.n_samples
            assert np.isclose(streamed.final_stat, recorded.final_stat, rtol=0, atol=1e-9)

class TestRecordScores:
    def test_upward_shift_keeps_h1(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            scores = rng.normal(0.0, 1.0, size=300)
            base = record_scores_sprt(scores, SYMMETRIC)
            if base.decision == Decision.H1 and not base.truncated:
                shifted = record_scores_sprt(scores + 0.3, SYMMETRIC)
                assert shifted.decision == Decision.H1
                assert shifted.n_samples <= base.n_samples

    def test_n_max_limits_length(self):
        out = record_scores_sprt([0.1] * 100, SYMMETRIC, n_max=10)
        assert out.truncated and out.n_samples == 10

class TestRunTrials:
    def test_thread_count_does_not_change_results(self, specs):
        oracle = oracle_scorer(*specs)
        source = MixtureSource(specs[1])
        serial = run_trials(oracle, source, 1, SYMMETRIC, 40, 1000, seed=5)
        parallel = run_trials(oracle, source, 1, SYMMETRIC, 40, 1000, seed=5, threads=4)
        assert serial == parallel

    def test_trial_streams_follow_seed(self, unit_spec):
        source = MixtureSource(unit_spec)
        t = Thresholds(a=-3.0, b=3.0)
        outcomes = run_trials(FirstCoordinate(), source, 1, t, 5, 500, seed=9)
        for i, out in enumerate(outcomes):
            expected = source.open(make_rng(9, 1, i)).take(out.n_samples)[:, 0].sum()
            assert np.isclose(out.final_stat, expected, rtol=0, atol=1e-9)
        other = run_trials(FirstCoordinate(), source, 1, t, 5, 500, seed=10)
        assert other != outcomes

class TestWaldIdentity:
    @pytest.mark.slow
    def test_oracle_satisfies_identity(self, specs):
        report = wald_identity_check(oracle_scorer(*specs), specs[0], specs[1], SYMMETRIC,
                                     trials=4000, n_max=10000, seed=17)
        assert abs(report.mean_exp_lambda_h0 - 1.0) <= 3 * report.se_h0
        assert abs(report.mean_exp_neg_lambda_h1 - 1.0) <= 3 * report.se_h1

    @pytest.mark.slow
    def test_doubled_scorer_violates_identity(self, specs):
        doubled = ScaledScorer(oracle_scorer(*specs), 2.0)
        report = wald_identity_check(doubled, specs[0], specs[1], SYMMETRIC,
                                     trials=4000, n_max=10000, seed=17)
        outside_h0 = abs(report.mean_exp_lambda_h0 - 1.0) > 3 * report.se_h0
        outside_h1 = abs(report.mean_exp_neg_lambda_h1 - 1.0) > 3 * report.se_h1
        assert outside_h0 or outside_h1

    def test_all_truncated_aborts(self, specs):
        with pytest.raises(SprtAbortError):
            wald_identity_check(ConstantScorer(0.0), specs[0], specs[1], SYMMETRIC,
                                trials=3, n_max=5, seed=0)
