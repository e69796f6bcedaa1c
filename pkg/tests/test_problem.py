"""Tests for problem instances, constraint evaluators and metrics."""

import json

import numpy as np
import pytest
from django.test import SimpleTestCase, override_settings

from maxsamples.classifier import Dataset, save_classifier
from maxsamples.exceptions import (
    DataError,
    DimensionError,
    FrozenFeatureError,
    ProblemError,
)
from maxsamples.numkit import Rng, finite_diff_grad
from maxsamples.problem import (
    PerturbProblem,
    SequenceGroups,
    allocate_group_budgets,
    budget_lhs,
    confidence_violation,
    confidence_violation_grad,
    confidence_violations,
    deviations,
    load_problem,
    margin_violation,
    metrics,
    read_dataset_csv,
    save_problem,
    write_dataset_csv,
)
from tests.builders import (
    SAMPLES,
    confident_xhat,
    logistic_classifier,
    mlp_classifier,
    small_problem,
)


class TestPerturbProblem(SimpleTestCase):
    def test_shapes(self):
        prob = small_problem()
        self.assertEqual(prob.n_samples, 4)
        self.assertEqual(prob.n_features, 3)
        np.testing.assert_array_equal(prob.targets, np.tile([0.0, 1.0], (4, 1)))

    def test_arrays_are_frozen(self):
        prob = small_problem()
        with pytest.raises(ValueError):
            prob.X[0, 0] = 9.0
        with pytest.raises(ValueError):
            prob.budgets[0] = 9.0

    def test_rejects_samples_already_in_desired_class(self):
        with pytest.raises(ProblemError) as exc_info:
            PerturbProblem(
                X=SAMPLES,
                mask=np.ones(3, dtype=bool),
                budgets=np.ones(3),
                desired=np.array([1, 0, 1, 1]),
                delta=0.1,
                classifier=logistic_classifier(),
            )
        assert "[1]" in str(exc_info.value)

    def test_rejects_negative_budget(self):
        with pytest.raises(ProblemError):
            small_problem(budgets=(1.0, -1.0, 0.0))

    def test_rejects_non_positive_delta(self):
        with pytest.raises(ProblemError):
            PerturbProblem(
                X=SAMPLES,
                mask=np.ones(3, dtype=bool),
                budgets=np.ones(3),
                desired=np.ones(4, dtype=int),
                delta=0.0,
                classifier=logistic_classifier(),
            )

    def test_dimension_checks(self):
        with pytest.raises(DimensionError):
            small_problem(budgets=(1.0, 1.0))
        with pytest.raises(DimensionError):
            PerturbProblem(
                X=np.zeros((2, 4)),
                mask=np.ones(4, dtype=bool),
                budgets=np.ones(4),
                desired=np.ones(2, dtype=int),
                delta=0.1,
                classifier=logistic_classifier(),
            )

    def test_groups_must_cover_samples(self):
        with pytest.raises(ProblemError):
            small_problem(groups=SequenceGroups(((0, 1), (2,))))

    def test_subset_and_with_budgets(self):
        prob = small_problem()
        sub = prob.subset([3, 1])
        np.testing.assert_array_equal(sub.X, SAMPLES[[3, 1]])
        self.assertEqual(sub.n_samples, 2)
        np.testing.assert_array_equal(prob.with_budgets([1, 2, 3]).budgets, [1, 2, 3])


class TestBudgetConstraints(SimpleTestCase):
    def test_deviations_are_squared_differences(self):
        prob = small_problem()
        Xhat = confident_xhat(prob)
        A = deviations(prob, Xhat)
        np.testing.assert_allclose(A[:, 0], [2.56, 1.5625, 5.0625, 0.0])
        np.testing.assert_array_equal(A[:, 1:], 0.0)

    def test_budget_lhs(self):
        prob = small_problem()
        Xhat = confident_xhat(prob)
        lhs = budget_lhs(prob, Xhat, np.array([1, 1, 0, 0]))
        np.testing.assert_allclose(lhs, [4.1225 - 4.5, -1.0, 0.0])

    def test_frozen_feature_change_rejected(self):
        prob = small_problem()
        Xhat = np.array(prob.X)
        Xhat[2, 2] += 0.5
        with pytest.raises(FrozenFeatureError) as exc_info:
            budget_lhs(prob, Xhat, np.ones(4))
        assert "[2]" in str(exc_info.value)

    def test_z_shape(self):
        prob = small_problem()
        with pytest.raises(DimensionError):
            budget_lhs(prob, prob.X, np.ones(3))


class TestConfidenceViolation(SimpleTestCase):
    def test_margin_violation_values(self):
        self.assertAlmostEqual(margin_violation(np.array([0.6, 0.4]), 1, 0.1), 0.3)
        self.assertEqual(margin_violation(np.array([0.2, 0.8]), 1, 0.1), 0.0)

    def test_margin_violation_three_classes(self):
        proba = np.array([[0.5, 0.3, 0.2], [0.1, 0.2, 0.7]])
        np.testing.assert_allclose(
            margin_violation(proba, np.array([1, 2]), 0.05), [0.25, 0.0]
        )

    def test_per_sample_matches_batch(self):
        prob = small_problem()
        batch = confidence_violations(prob, prob.X)
        for j in range(prob.n_samples):
            self.assertAlmostEqual(confidence_violation(prob, prob.X[j], j), batch[j])
        self.assertTrue(np.all(batch > 0))

    def test_confident_rows_have_zero_violation(self):
        prob = small_problem()
        v = confidence_violations(prob, confident_xhat(prob))
        np.testing.assert_array_equal(v[:3], 0.0)
        self.assertGreater(v[3], 0.0)

    def test_index_out_of_range(self):
        prob = small_problem()
        with pytest.raises(ProblemError):
            confidence_violation(prob, prob.X[0], 4)

    def test_gradient_matches_finite_differences(self):
        """Every sample violates the margin, so the hinge is smooth there."""
        c = mlp_classifier()
        X = Rng(8).normal(1.0, (5, 3))
        proba = c.predict_proba(X)
        prob = PerturbProblem(
            X=X,
            mask=np.ones(3, dtype=bool),
            budgets=np.ones(3),
            desired=np.argmin(proba, axis=1),
            delta=0.05,
            classifier=c,
        )
        violation, grad = confidence_violation_grad(prob, X)
        self.assertTrue(np.all(violation > 0))
        numeric = finite_diff_grad(
            lambda Z: float(confidence_violations(prob, Z).sum()), X
        )
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-8)

    def test_gradient_zero_on_satisfied_rows(self):
        prob = small_problem()
        _, grad = confidence_violation_grad(prob, confident_xhat(prob))
        np.testing.assert_array_equal(grad[:3], 0.0)
        self.assertTrue(np.any(grad[3] != 0.0))


class TestGroupBudgets(SimpleTestCase):
    def test_shares_sum_exactly(self):
        groups = SequenceGroups(((0,), (1, 2), (3, 4, 5, 6)))
        B = np.array([1.0, 0.3, 7.123456789, 0.0])
        allocation = allocate_group_budgets(groups, B)
        self.assertEqual(allocation.shape, (3, 4))
        for i in range(B.size):
            self.assertEqual(float(np.sum(allocation[:, i])), B[i])
            self.assertEqual(float(allocation[::-1, i].sum()), B[i])
        np.testing.assert_allclose(allocation[:, 2], B[2] * np.array([1, 2, 4]) / 7)

    def test_equal_groups_split_evenly(self):
        groups = SequenceGroups(((0, 1), (2, 3)))
        allocation = allocate_group_budgets(groups, np.array([4.5, 1.0]))
        np.testing.assert_array_equal(allocation, [[2.25, 0.5], [2.25, 0.5]])

    def test_groups_validation(self):
        with pytest.raises(ProblemError):
            SequenceGroups(((0, 1), (1, 2)))
        with pytest.raises(ProblemError):
            SequenceGroups(((0,), ()))

    def test_subproblems_carry_shares(self):
        prob = small_problem(groups=SequenceGroups(((0, 1), (2, 3))))
        parts = prob.subproblems()
        self.assertEqual(len(parts), 2)
        idx, sub = parts[1]
        np.testing.assert_array_equal(idx, [2, 3])
        np.testing.assert_array_equal(sub.budgets, [2.25, 0.5, 0.0])


class TestMetrics(SimpleTestCase):
    def test_selected_set(self):
        prob = small_problem()
        m = metrics(prob, confident_xhat(prob), [1, 0])
        self.assertEqual(m.selected, 2)
        self.assertFalse(m.empty_selection)
        self.assertAlmostEqual(m.consumption_per_sample, 4.1225 / 2)
        # feature 2 has zero budget and is left out of the residual
        self.assertAlmostEqual(m.mean_budget_residual, ((4.5 - 4.1225) / 4.5 + 1) / 2)
        self.assertGreater(m.mean_prediction_gap, 0.0)
        self.assertEqual(m.as_dict()["selected"], 2)

    def test_empty_selection(self):
        prob = small_problem()
        with self.assertLogs("maxsamples", level="INFO") as logs:
            m = metrics(prob, prob.X, [])
        self.assertTrue(m.empty_selection)
        self.assertEqual(m.consumption_per_sample, 0.0)
        self.assertIsNone(m.mean_prediction_gap)
        self.assertEqual(m.mean_budget_residual, 1.0)
        self.assertIn("maxsamples_empty_selection", logs.output[0])

    def test_out_of_range_index(self):
        prob = small_problem()
        with pytest.raises(ProblemError):
            metrics(prob, prob.X, [4])


class TestFiles(SimpleTestCase):
    @pytest.fixture(autouse=True)
    def _scratch_dir(self, tmp_path):
        self.tmp_path = tmp_path

    def test_dataset_csv_round_trip(self):
        data = Dataset(Rng(0).normal(1.0, (6, 2)), np.array([0, 1, 0, 1, 2, 2]))
        path = self.tmp_path / "data.csv"
        write_dataset_csv(data, path)
        loaded = read_dataset_csv(path)
        np.testing.assert_array_equal(loaded.X, data.X)
        np.testing.assert_array_equal(loaded.y, data.y)

    def test_malformed_dataset(self):
        path = self.tmp_path / "data.csv"
        path.write_text("x0,label\nabc,1\n")
        with pytest.raises(DataError):
            read_dataset_csv(path)

    def test_problem_file_resolves_classifier_relative_to_itself(self):
        prob = small_problem(groups=SequenceGroups(((0, 1), (2, 3))))
        root = self.tmp_path
        (root / "runs").mkdir()
        save_classifier(prob.classifier, root / "classifier.json")
        save_problem(prob, root / "runs" / "problem.json", "../classifier.json")
        loaded = load_problem(root / "runs" / "problem.json")
        np.testing.assert_array_equal(loaded.X, prob.X)
        np.testing.assert_array_equal(loaded.mask, prob.mask)
        np.testing.assert_array_equal(loaded.budgets, prob.budgets)
        self.assertEqual(loaded.groups, prob.groups)
        self.assertEqual(loaded.delta, 0.1)

    @override_settings(MAXSAMPLES={"UNLIMITED_BUDGET": 123.0})
    def test_missing_budgets_mean_unlimited(self):
        prob = small_problem()
        root = self.tmp_path
        save_classifier(prob.classifier, root / "classifier.json")
        save_problem(prob, root / "problem.json", "classifier.json")
        document = json.loads((root / "problem.json").read_text())
        del document["B"]
        (root / "problem.json").write_text(json.dumps(document))
        loaded = load_problem(root / "problem.json")
        np.testing.assert_array_equal(loaded.budgets, [123.0] * 3)

    def test_missing_key(self):
        path = self.tmp_path / "problem.json"
        path.write_text(json.dumps({"X": [[0.0]]}))
        with pytest.raises(DataError):
            load_problem(path)
