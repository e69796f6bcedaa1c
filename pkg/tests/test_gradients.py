"""Analytic Lagrangian gradients against central differences.

Every point used here keeps each sample strictly inside the margin-violating
region with a unique runner-up class, so the Lagrangians are smooth around it.
"""

import numpy as np
import pytest
from django.test import SimpleTestCase

from maxsamples.numkit import Rng, finite_diff_grad, gumbel
from maxsamples.problem import confidence_violations
from maxsamples.solvers import HyperParams
from maxsamples.solvers.bcms import bcms_lagrangian
from maxsamples.solvers.ccms import ccms_lagrangian
from maxsamples.solvers.kl import kl_lagrangian
from maxsamples.solvers.ms import ms_lagrangian
from tests.builders import small_problem

RTOL = 1e-5
ATOL = 1e-7


def free_problem():
    return small_problem(budgets=(0.3, 1.0, 0.3), mask=(True, True, True))


def score_preserving_point(prob, seed=0):
    """Move along ``(1, -2, 0)`` and feature 2, which leave ``2 * x0 + x1`` fixed."""
    rng = Rng(seed)
    t = 2.0 * rng.uniform(prob.n_samples) - 1.0
    r = 2.0 * rng.uniform(prob.n_samples) - 1.0
    offsets = np.column_stack([0.5 * t, -t, 0.5 * r])
    return prob.X + offsets


def multipliers(prob, seed=1):
    rng = Rng(seed)
    return 0.5 + rng.uniform(prob.n_features), 0.5 + rng.uniform(prob.n_samples)


class TestPointIsSmooth(SimpleTestCase):
    def test_every_sample_violates_the_margin(self):
        prob = free_problem()
        violations = confidence_violations(prob, score_preserving_point(prob))
        self.assertTrue(np.all(violations > prob.delta / 2))


class TestMaxSamplesLagrangian(SimpleTestCase):
    def test_xhat_gradient(self):
        prob = free_problem()
        Xhat = score_preserving_point(prob)
        lam, mu = multipliers(prob)
        z = np.array([1.0, 0.0, 1.0, 1.0])
        _, grad = ms_lagrangian(prob, Xhat, z, lam, mu)
        numeric = finite_diff_grad(
            lambda X: ms_lagrangian(prob, X, z, lam, mu)[0], Xhat
        )
        np.testing.assert_allclose(grad, numeric, rtol=RTOL, atol=ATOL)
        # unselected samples do not enter the Lagrangian
        np.testing.assert_array_equal(grad[1], 0.0)

    def test_value(self):
        prob = free_problem()
        lam, mu = np.array([1.0, 2.0, 0.0]), np.zeros(4)
        value, _ = ms_lagrangian(prob, prob.X, np.ones(4), lam, mu)
        self.assertAlmostEqual(value, 4.0 + 0.3 + 2.0)

    def test_masked_features_get_no_gradient(self):
        prob = small_problem()
        Xhat = np.array(prob.X)
        Xhat[:, 0] += 0.1
        lam, mu = multipliers(prob)
        _, grad = ms_lagrangian(prob, Xhat, np.ones(4), lam, mu)
        np.testing.assert_array_equal(grad[:, 2], 0.0)


class TestBernoulliLagrangian(SimpleTestCase):
    def setUp(self):
        self.prob = free_problem()
        self.Xhat = score_preserving_point(self.prob)
        self.lam, self.mu = multipliers(self.prob)
        rng = Rng(2)
        self.G1, self.G2 = gumbel(rng, (6, 4)), gumbel(rng, (6, 4))
        self.Pi = np.array([0.2, 0.4, 0.6, 0.8])
        self.hp = HyperParams(omega=0.7, kappa=2.0)

    def evaluate(self, Xhat, Pi):
        return bcms_lagrangian(
            self.prob, Xhat, Pi, self.lam, self.mu, self.G1, self.G2, self.hp
        )

    def value(self, Xhat, Pi):
        return self.evaluate(Xhat, Pi)[0]

    def test_pi_gradient(self):
        _, grad_pi, _ = self.evaluate(self.Xhat, self.Pi)
        numeric = finite_diff_grad(lambda Pi: self.value(self.Xhat, Pi), self.Pi)
        np.testing.assert_allclose(grad_pi, numeric, rtol=RTOL, atol=ATOL)

    def test_xhat_gradient(self):
        _, _, grad_x = self.evaluate(self.Xhat, self.Pi)
        numeric = finite_diff_grad(lambda X: self.value(X, self.Pi), self.Xhat)
        np.testing.assert_allclose(grad_x, numeric, rtol=RTOL, atol=ATOL)


class TestCategoricalLagrangian(SimpleTestCase):
    def setUp(self):
        self.prob = free_problem()
        self.Xhat = score_preserving_point(self.prob, seed=3)
        self.lam, self.mu = multipliers(self.prob, seed=4)
        rng = Rng(5)
        # one draw per replicate keeps every relaxed selection below one
        self.G = [gumbel(rng, (4, 1)) for _ in range(5)]
        self.Pi = np.array([0.1, 0.2, 0.3, 0.4])
        self.hp = HyperParams(omega=0.8, kappa=3.0)

    def value(self, Xhat, Pi):
        return ccms_lagrangian(
            self.prob, Xhat, Pi, self.lam, self.mu, self.G, self.hp
        )[0]

    def test_pi_gradient(self):
        _, grad_pi, _ = ccms_lagrangian(
            self.prob, self.Xhat, self.Pi, self.lam, self.mu, self.G, self.hp
        )
        numeric = finite_diff_grad(lambda Pi: self.value(self.Xhat, Pi), self.Pi)
        np.testing.assert_allclose(grad_pi, numeric, rtol=RTOL, atol=ATOL)

    def test_xhat_gradient(self):
        _, _, grad_x = ccms_lagrangian(
            self.prob, self.Xhat, self.Pi, self.lam, self.mu, self.G, self.hp
        )
        numeric = finite_diff_grad(lambda X: self.value(X, self.Pi), self.Xhat)
        np.testing.assert_allclose(grad_x, numeric, rtol=RTOL, atol=ATOL)

    def test_stacked_draws_match_list(self):
        stacked = np.stack(self.G)
        a = ccms_lagrangian(
            self.prob, self.Xhat, self.Pi, self.lam, self.mu, self.G, self.hp
        )
        b = ccms_lagrangian(
            self.prob, self.Xhat, self.Pi, self.lam, self.mu, stacked, self.hp
        )
        self.assertEqual(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestKLLagrangian(SimpleTestCase):
    def setUp(self):
        self.prob = free_problem()
        self.Xhat = score_preserving_point(self.prob, seed=6)
        self.lam, self.mu = multipliers(self.prob, seed=7)

    def test_xhat_gradient(self):
        _, grad = kl_lagrangian(self.prob, self.Xhat, self.lam, self.mu, 1.0)
        numeric = finite_diff_grad(
            lambda X: kl_lagrangian(self.prob, X, self.lam, self.mu, 1.0)[0],
            self.Xhat,
        )
        np.testing.assert_allclose(grad, numeric, rtol=RTOL, atol=ATOL)

    def test_soft_targets(self):
        targets = np.array([[0.3, 0.7], [0.1, 0.9], [0.5, 0.5], [0.2, 0.8]])
        _, grad = kl_lagrangian(
            self.prob, self.Xhat, self.lam, self.mu, 0.5, targets
        )
        numeric = finite_diff_grad(
            lambda X: kl_lagrangian(
                self.prob, X, self.lam, self.mu, 0.5, targets
            )[0],
            self.Xhat,
        )
        np.testing.assert_allclose(grad, numeric, rtol=RTOL, atol=ATOL)

    def test_value_at_original_point(self):
        prob = self.prob
        lam, mu = np.ones(3), np.zeros(4)
        value, _ = kl_lagrangian(prob, prob.X, lam, mu, 1.0)
        proba = prob.classifier.predict_proba(prob.X)
        expected = -np.log(proba[:, 1]).sum() - prob.budgets.sum()
        assert value == pytest.approx(expected)


class TestRandomStates(SimpleTestCase):
    """Twenty random points, multipliers and draws for every Lagrangian."""

    STATES = range(20)

    def setUp(self):
        self.prob = free_problem()

    def state(self, seed):
        Xhat = score_preserving_point(self.prob, seed=100 + seed)
        lam, mu = multipliers(self.prob, seed=200 + seed)
        return Rng(300 + seed), Xhat, lam, mu

    def assert_matches(self, fn, x, grad):
        numeric = finite_diff_grad(fn, x)
        np.testing.assert_allclose(grad, numeric, rtol=RTOL, atol=ATOL)

    def test_max_samples(self):
        for seed in self.STATES:
            rng, Xhat, lam, mu = self.state(seed)
            z = (rng.uniform(4) < 0.7).astype(float)
            with self.subTest(seed=seed):
                _, grad = ms_lagrangian(self.prob, Xhat, z, lam, mu)
                self.assert_matches(
                    lambda X: ms_lagrangian(self.prob, X, z, lam, mu)[0], Xhat, grad
                )

    def test_bernoulli(self):
        hp = HyperParams(omega=0.7, kappa=2.0)
        for seed in self.STATES:
            rng, Xhat, lam, mu = self.state(seed)
            G1, G2 = gumbel(rng, (6, 4)), gumbel(rng, (6, 4))
            Pi = 0.1 + 0.8 * rng.uniform(4)

            def value(X, P):
                return bcms_lagrangian(self.prob, X, P, lam, mu, G1, G2, hp)[0]

            with self.subTest(seed=seed):
                _, grad_pi, grad_x = bcms_lagrangian(
                    self.prob, Xhat, Pi, lam, mu, G1, G2, hp
                )
                self.assert_matches(lambda P: value(Xhat, P), Pi, grad_pi)
                self.assert_matches(lambda X: value(X, Pi), Xhat, grad_x)

    def test_categorical(self):
        hp = HyperParams(omega=0.8, kappa=3.0)
        for seed in self.STATES:
            rng, Xhat, lam, mu = self.state(seed)
            G = [gumbel(rng, (4, 1)) for _ in range(5)]
            weights = 0.2 + rng.uniform(4)
            Pi = weights / weights.sum()

            def value(X, P):
                return ccms_lagrangian(self.prob, X, P, lam, mu, G, hp)[0]

            with self.subTest(seed=seed):
                _, grad_pi, grad_x = ccms_lagrangian(
                    self.prob, Xhat, Pi, lam, mu, G, hp
                )
                self.assert_matches(lambda P: value(Xhat, P), Pi, grad_pi)
                self.assert_matches(lambda X: value(X, Pi), Xhat, grad_x)

    def test_kl(self):
        for seed in self.STATES:
            _, Xhat, lam, mu = self.state(seed)
            with self.subTest(seed=seed):
                _, grad = kl_lagrangian(self.prob, Xhat, lam, mu, 1.0)
                self.assert_matches(
                    lambda X: kl_lagrangian(self.prob, X, lam, mu, 1.0)[0], Xhat, grad
                )
