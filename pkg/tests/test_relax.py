"""Tests for the Gumbel relaxations and the chance-constraint estimate."""

import numpy as np
import pytest
from django.test import SimpleTestCase

from maxsamples.numkit import Rng, SmoothIndicatorParams, finite_diff_grad, gumbel
from maxsamples.solvers import HyperParams
from maxsamples.solvers.relax import (
    PI_CLAMP,
    bernoulli_relax,
    bernoulli_relax_grad,
    categorical_relax,
    categorical_softmax,
    chance_prob_estimate,
    chance_terms,
)
from tests.builders import confident_xhat, small_problem


class TestBernoulliRelax(SimpleTestCase):
    def test_symmetric_draws_give_one_half(self):
        for g in (-1.3, 0.0, 2.7):
            assert bernoulli_relax(0.5, g, g, 0.7) == pytest.approx(0.5)

    def test_returns_float_for_scalars(self):
        self.assertIsInstance(bernoulli_relax(0.3, 0.1, -0.2, 1.0), float)

    def test_low_temperature_approaches_a_hard_draw(self):
        v = bernoulli_relax(0.9, 0.5, -0.5, 1e-3)
        self.assertGreater(v, 0.999)

    def test_mean_tracks_probability(self):
        """At low temperature the relaxed draws average near ``pi``."""
        rng = Rng(0)
        g1, g2 = gumbel(rng, 200_000), gumbel(rng, 200_000)
        hard = bernoulli_relax(0.3, g1, g2, 0.01)
        self.assertAlmostEqual(float(hard.mean()), 0.3, delta=0.01)

    def test_hard_threshold_frequency_equals_probability(self):
        rng = Rng(1)
        g1, g2 = gumbel(rng, 200_000), gumbel(rng, 200_000)
        for pi in (0.1, 0.5, 0.9):
            hard = bernoulli_relax(pi, g1, g2, 1.0) > 0.5
            self.assertAlmostEqual(float(hard.mean()), pi, delta=0.01)

    def test_clamped_probabilities_stay_finite(self):
        v = bernoulli_relax(np.array([0.0, 1.0]), 0.0, 0.0, 1.0)
        self.assertTrue(np.all(np.isfinite(v)))
        self.assertTrue(np.all((v > 0) & (v < 1)))

    def test_gradient_matches_finite_differences(self):
        pi = np.array([0.2, 0.5, 0.8])
        g1, g2 = np.array([0.3, -1.0, 0.8]), np.array([-0.4, 0.2, 1.5])
        v = bernoulli_relax(pi, g1, g2, 0.8)
        numeric = finite_diff_grad(
            lambda p: float(np.sum(bernoulli_relax(p, g1, g2, 0.8))), pi
        )
        np.testing.assert_allclose(
            bernoulli_relax_grad(v, pi, 0.8), numeric, rtol=1e-5, atol=1e-10
        )

    def test_gradient_zero_outside_clamp(self):
        pi = np.array([0.0, 0.5, 1.0])
        v = bernoulli_relax(pi, 0.0, 0.0, 1.0)
        grad = bernoulli_relax_grad(v, pi, 1.0)
        self.assertEqual(grad[0], 0.0)
        self.assertEqual(grad[2], 0.0)
        self.assertGreater(grad[1], 0.0)
        self.assertLess(PI_CLAMP, 0.5)


class TestCategoricalRelax(SimpleTestCase):
    def test_each_draw_is_a_distribution_over_samples(self):
        rng = Rng(1)
        Pi = np.array([0.1, 0.2, 0.3, 0.4])
        Z = categorical_softmax(Pi, gumbel(rng, (4, 3)), 0.5)
        self.assertEqual(Z.shape, (4, 3))
        np.testing.assert_allclose(Z.sum(axis=0), np.ones(3))

    def test_relaxed_selection_is_capped_at_one(self):
        rng = Rng(2)
        Pi = np.array([0.97, 0.01, 0.01, 0.01])
        v = categorical_relax(Pi, gumbel(rng, (4, 3)), 0.1)
        self.assertTrue(np.all(v <= 1.0))
        self.assertTrue(np.all(v >= 0.0))

    def test_replicated_draws(self):
        rng = Rng(3)
        Pi = np.full(5, 0.2)
        G = gumbel(rng, (6, 5, 2))
        v = categorical_relax(Pi, G, 1.0)
        self.assertEqual(v.shape, (6, 5))
        np.testing.assert_allclose(v[4], categorical_relax(Pi, G[4], 1.0))

    def test_zero_probability_gets_no_mass(self):
        Pi = np.array([0.0, 0.5, 0.5])
        Z = categorical_softmax(Pi, np.zeros((3, 1)), 1.0)
        self.assertLess(Z[0, 0], 1e-11)

    def test_hard_draws_follow_the_coupon_collector_expectation(self):
        """K hard draws from a uniform Pi cover n(1 - (1 - 1/n)^K) distinct samples."""
        n, trials = 10, 10_000
        G = gumbel(Rng(5), (trials, n, n))
        v = categorical_relax(np.full(n, 1.0 / n), G, 1e-4)
        expected = n * (1.0 - (1.0 - 1.0 / n) ** n)
        covered = float(v.sum(axis=1).mean())
        self.assertAlmostEqual(covered, expected, delta=0.05 * expected)


class TestChanceEstimate(SimpleTestCase):
    def test_residuals(self):
        prob = small_problem()
        Xhat = confident_xhat(prob)
        V = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        residual, P = chance_terms(prob, Xhat, V, SmoothIndicatorParams())
        np.testing.assert_allclose(
            residual, [[4.1225 - 4.5, -1.0, 0.0], [5.0625 - 4.5, -1.0, 0.0]]
        )
        self.assertEqual(P.shape, (2, 3))

    def test_estimate_is_mean_of_smoothed_indicators(self):
        prob = small_problem()
        Xhat = confident_xhat(prob)
        V = Rng(4).uniform((7, 4))
        params = SmoothIndicatorParams(kappa=5.0)
        _, P = chance_terms(prob, Xhat, V, params)
        np.testing.assert_allclose(
            chance_prob_estimate(prob, Xhat, V, params), P.mean(axis=0)
        )

    def test_accepts_hyperparams(self):
        prob = small_problem()
        V = np.ones((2, 4))
        hp = HyperParams(kappa=3.0)
        np.testing.assert_allclose(
            chance_prob_estimate(prob, prob.X, V, hp),
            chance_prob_estimate(prob, prob.X, V, SmoothIndicatorParams(kappa=3.0)),
        )

    def test_sharp_indicator_counts_satisfied_draws(self):
        """With a steep indicator the estimate is the fraction of feasible draws."""
        prob = small_problem()
        Xhat = confident_xhat(prob)
        V = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        estimate = chance_prob_estimate(
            prob, Xhat, V, SmoothIndicatorParams(kappa=200.0)
        )
        self.assertAlmostEqual(estimate[0], 0.5, places=6)
        self.assertAlmostEqual(estimate[1], 1.0, places=6)

    def test_saturates_at_one_without_perturbation(self):
        prob = small_problem(budgets=(10.0, 10.0, 10.0))
        V = Rng(5).uniform((50, 4))
        estimate = chance_prob_estimate(prob, prob.X, V, SmoothIndicatorParams())
        self.assertTrue(np.all(estimate > 1.0 - 1e-6))

    def test_saturates_at_zero_for_huge_deviations(self):
        prob = small_problem(budgets=(10.0, 10.0, 10.0), mask=(True, True, True))
        estimate = chance_prob_estimate(
            prob, prob.X + 100.0, np.ones((5, 4)), SmoothIndicatorParams()
        )
        self.assertTrue(np.all(estimate < 1e-6))

    def test_independent_large_estimates_agree(self):
        prob = small_problem()
        Xhat = confident_xhat(prob)
        estimates = []
        for seed in (6, 7):
            rng = Rng(seed)
            G1, G2 = gumbel(rng, (10_000, 4)), gumbel(rng, (10_000, 4))
            V = bernoulli_relax(np.full(4, 0.5), G1, G2, 1.0)
            estimates.append(
                chance_prob_estimate(prob, Xhat, V, SmoothIndicatorParams())
            )
        np.testing.assert_allclose(estimates[0], estimates[1], atol=0.02)
