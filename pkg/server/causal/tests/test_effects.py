import numpy as np
import pandas as pd
from django.test import SimpleTestCase, tag
from hypothesis import given, settings as hyp_settings, strategies as st

from causal.effects.ate import ate
from causal.effects.blp import COLUMNS, DIFFERENTIAL_TERM, MEAN_TERM, blp_from_model, blp_test
from causal.effects.scores import DoublyRobustScores, doubly_robust_scores, scores_from_model
from causal.effects.transformed import (
    compare_feature_sets, transformed_outcome, transformed_outcome_errors, transformed_outcome_mse,
)
from causal.exceptions import DegenerateRegressorError, NonFiniteScoreError, ParameterError
from causal.forest import fit_causal_forest
from causal.tests.factories import SMALL_FOREST, make_effect_data
from eeg.io.types import FeatureMatrix


class ScoreTests(SimpleTestCase):

    def test_zero_residual(self):
        scores = doubly_robust_scores([2.0], [0.5], [4.0], [1], [5.0])
        self.assertEqual(scores.gamma[0], 2.0)

    def test_control_with_exact_outcome_model(self):
        scores = doubly_robust_scores([0.0], [0.5], [3.0], [0], [3.0])
        self.assertEqual(scores.gamma[0], 0.0)

    def test_matches_scalar_evaluation(self):
        rng = np.random.default_rng(0)
        tau, e, m = rng.normal(size=6), rng.uniform(0.2, 0.8, 6), rng.normal(size=6)
        W, Y = np.array([0, 1, 1, 0, 1, 0]), rng.normal(size=6)
        scores = doubly_robust_scores(tau, e, m, W, Y)
        for i in range(6):
            expected = tau[i] + (W[i] - e[i]) / (e[i] * (1 - e[i])) * (Y[i] - m[i] - (W[i] - e[i]) * tau[i])
            self.assertAlmostEqual(scores.gamma[i], expected, delta=1e-12)

    @hyp_settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_gamma_is_arm_difference(self, seed):
        rng = np.random.default_rng(seed)
        n = 20
        scores = doubly_robust_scores(rng.normal(size=n), rng.uniform(0.05, 0.95, n), rng.normal(size=n),
                                      rng.integers(0, 2, n), rng.normal(size=n))
        np.testing.assert_allclose(scores.gamma, scores.gamma_1 - scores.gamma_0, rtol=0, atol=1e-9)

    def test_arm_score_reduces_to_outcome_model(self):
        tau, e, m = 1.5, 0.3, 2.0
        u_1 = m + (1 - e) * tau
        scores = doubly_robust_scores([tau], [e], [m], [1], [u_1])
        self.assertAlmostEqual(scores.gamma_1[0], u_1, delta=1e-12)

    def test_non_finite(self):
        with self.assertRaises(NonFiniteScoreError):
            doubly_robust_scores([np.nan], [0.5], [0.0], [1], [1.0])
        with self.assertRaises(ParameterError):
            doubly_robust_scores([0.0], [1.0], [0.0], [1], [1.0])

    def test_dict_round_trip_keeps_fields(self):
        scores = doubly_robust_scores([1.0, 2.0], [0.5, 0.5], [0.0, 0.0], [1, 0], [1.0, 0.0], subject_ids=["a", "b"])
        again = DoublyRobustScores.from_dict(scores.to_dict())
        self.assertEqual(again.subject_ids, ("a", "b"))
        np.testing.assert_array_equal(again.gamma, scores.gamma)


class AteTests(SimpleTestCase):

    def test_constant_scores(self):
        result = ate(np.full(10, 0.7))
        self.assertEqual(result.tau_hat, 0.7)
        self.assertEqual(result.score_variance, 0.0)
        self.assertEqual(result.ci_95, (0.7, 0.7))

    def test_two_points(self):
        result = ate(np.array([0.0, 2.0]))
        self.assertEqual(result.tau_hat, 1.0)
        self.assertEqual(result.score_variance, 1.0)
        self.assertAlmostEqual(result.standard_error, np.sqrt(0.5), delta=1e-15)
        self.assertLessEqual(result.ci_low, result.tau_hat)
        self.assertLessEqual(result.tau_hat, result.ci_high)

    def test_permutation_invariant(self):
        gamma = np.random.default_rng(1).normal(size=50)
        first = ate(gamma)
        second = ate(gamma[::-1].copy())
        self.assertAlmostEqual(first.tau_hat, second.tau_hat, delta=1e-12)
        self.assertAlmostEqual(first.standard_error, second.standard_error, delta=1e-12)

    def test_needs_two(self):
        with self.assertRaises(ParameterError):
            ate(np.array([1.0]))

    def test_coverage(self):
        covered = 0
        for rep in range(100):
            rng = np.random.default_rng(rep)
            n = 400
            W = rng.binomial(1, 0.5, n)
            Y = 0.5 * W + rng.normal(size=n)
            scores = doubly_robust_scores(np.zeros(n), np.full(n, 0.5), np.full(n, Y.mean()), W, Y)
            result = ate(scores)
            covered += result.ci_low <= 0.5 <= result.ci_high
        self.assertGreaterEqual(covered, 90)

    def test_robust_to_wrong_outcome_model(self):
        estimates = []
        for rep in range(200):
            rng = np.random.default_rng(1000 + rep)
            n = 200
            x = rng.normal(size=n)
            W = rng.binomial(1, 0.5, n)
            Y = 2 * x + 1.0 * W + rng.normal(size=n)
            wrong_m = np.full(n, 5.0) - x
            estimates.append(ate(doubly_robust_scores(np.zeros(n), np.full(n, 0.5), wrong_m, W, Y)).tau_hat)
        estimates = np.array(estimates)
        bias = estimates.mean() - 1.0
        self.assertLess(abs(bias), 2 * estimates.std(ddof=1) / np.sqrt(len(estimates)))


def oracle_blp_data(seed, n=500):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    tau = 1.0 + 2.0 * x
    W = rng.binomial(1, 0.5, n)
    m = x + 0.5 * tau
    Y = x + tau * W + rng.normal(size=n)
    return Y, W, m, np.full(n, 0.5), tau


class BlpTests(SimpleTestCase):

    def test_table_layout(self):
        result = blp_test(*oracle_blp_data(0))
        self.assertEqual(list(result.table.columns), COLUMNS)
        self.assertEqual(list(result.table.index), [MEAN_TERM, DIFFERENTIAL_TERM])
        self.assertEqual(result.dropped, ())

    def test_oracle_effects_calibrated(self):
        hits = 0
        for rep in range(100):
            result = blp_test(*oracle_blp_data(rep))
            hits += 0.7 <= result.beta_hat <= 1.3 and result.beta_p_value < 0.05
        self.assertGreaterEqual(hits, 80)

    def test_constant_prediction_drops_beta(self):
        Y, W, m, e, _ = oracle_blp_data(1)
        result = blp_test(Y, W, m, e, np.full(len(Y), 1.0))
        self.assertEqual(result.dropped, (DIFFERENTIAL_TERM,))
        self.assertTrue(np.isnan(result.beta_hat))

    def test_zero_mean_drops_alpha(self):
        Y, W, m, e, tau = oracle_blp_data(2)
        result = blp_test(Y, W, m, e, tau - tau.mean())
        self.assertIn(MEAN_TERM, result.dropped)
        self.assertEqual(list(result.table.index), [DIFFERENTIAL_TERM])

    def test_all_degenerate(self):
        Y, W, m, e, _ = oracle_blp_data(3)
        with self.assertRaises(DegenerateRegressorError):
            blp_test(Y, W, m, e, np.zeros(len(Y)))

    def test_arm_flip_preserves_t_values(self):
        Y, W, m, e, tau = oracle_blp_data(4)
        first = blp_test(Y, W, m, e, tau)
        flipped = blp_test(Y, 1 - W, m, 1 - e, tau)
        np.testing.assert_allclose(np.abs(first.table["t value"]), np.abs(flipped.table["t value"]), rtol=1e-9)


@tag("slow")
class BlpNullCalibrationTests(SimpleTestCase):

    def test_constant_effect_rarely_significant(self):
        rejections = 0
        for rep in range(20):
            X, W, Y, _ = make_effect_data(n=200, seed=500 + rep, tau=lambda X: np.full(len(X), 1.0))
            model = fit_causal_forest(X, W, Y, SMALL_FOREST.replace(seed=rep))
            rejections += blp_from_model(model).beta_p_value < 0.05
        self.assertLessEqual(rejections, 5)


class TransformedOutcomeTests(SimpleTestCase):

    def test_balanced_unbiasedness(self):
        W = np.array([1, 0] * 50)
        Y = 1.5 * W
        self.assertAlmostEqual(transformed_outcome(Y, W, 0.5).mean(), 1.5, delta=1e-12)

    def test_literal_variant(self):
        np.testing.assert_allclose(transformed_outcome([3.0], [1], 0.5, literal=True), [8.0])
        np.testing.assert_allclose(transformed_outcome([3.0], [1], 0.5), [6.0])

    def test_mean_is_best_constant(self):
        rng = np.random.default_rng(5)
        W, Y = rng.binomial(1, 0.5, 100), rng.normal(size=100)
        best = transformed_outcome(Y, W, 0.5).mean()
        floor = transformed_outcome_mse(Y, W, 0.5, np.full(100, best))
        for other in (best - 0.1, best + 0.1, 0.0, 2.0):
            self.assertGreater(transformed_outcome_mse(Y, W, 0.5, np.full(100, other)), floor)

    def test_errors_average_to_mse(self):
        Y, W, tau = np.array([1.0, 0.0, 2.0]), np.array([1, 0, 1]), np.array([0.5, 0.5, 0.5])
        errors = transformed_outcome_errors(Y, W, 0.5, tau)
        self.assertEqual(errors.shape, (3,))
        self.assertAlmostEqual(errors.mean(), transformed_outcome_mse(Y, W, 0.5, tau), delta=1e-15)

    def test_truth_wins(self):
        wins = 0
        for rep in range(100):
            rng = np.random.default_rng(2000 + rep)
            x = rng.normal(size=500)
            tau = 2.0 * x
            W = rng.binomial(1, 0.5, 500)
            Y = tau * W + rng.normal(size=500)
            wins += transformed_outcome_mse(Y, W, 0.5, tau) < transformed_outcome_mse(Y, W, 0.5, np.zeros(500))
        self.assertGreaterEqual(wins, 90)

    def test_probability_range(self):
        with self.assertRaises(ParameterError):
            transformed_outcome([1.0], [1], 1.0)

    def test_compare_feature_sets_layout(self):
        X, W, Y, _ = make_effect_data(n=160, seed=6, tau=lambda X: np.where(X[:, 0] > 0.5, 1.0, -1.0))
        ids = [f"s{i}" for i in range(160)]
        noise = np.random.default_rng(7).uniform(size=(160, 4))
        sets = {
            "signal": FeatureMatrix(ids, X, W, Y, ["a", "b", "c", "d"], ["continuous"] * 4),
            "noise": FeatureMatrix(ids, noise, W, Y, ["e", "f", "g", "h"], ["continuous"] * 4),
        }
        table = compare_feature_sets(sets, np.arange(110), np.arange(110, 160),
                                     SMALL_FOREST.replace(num_trees=40, nuisance_trees=10, cross_fit_folds=3))
        self.assertIsInstance(table, pd.DataFrame)
        self.assertEqual(list(table.index), ["signal", "noise"])
        self.assertEqual(list(table.columns), ["Mean value", "Standard Error"])
        self.assertTrue((table["Standard Error"] > 0).all())


class ModelScoreTests(SimpleTestCase):

    def test_scores_from_forest(self):
        X, W, Y, _ = make_effect_data(n=120, seed=8)
        model = fit_causal_forest(X, W, Y, SMALL_FOREST.replace(num_trees=40, nuisance_trees=10))
        scores = scores_from_model(model)
        self.assertEqual(scores.n, 120)
        self.assertTrue(np.isfinite(scores.gamma).all())
        np.testing.assert_array_equal(scores.tau_hat, model.predict_oob())
