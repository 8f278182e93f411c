import numpy as np
from unittest import TestCase

from brpo_lab.exceptions import ConstraintViolationError, DimensionMismatchError, InvalidModelError
from datagen.models import Batch
from mdp_core.generators import random_policy
from mdp_core.models import TabularPolicy
from residual_policy.mixing import (
    equality_residuals,
    extend_tabular,
    mix,
    random_feasible_confidence,
    validate_confidence,
)
from residual_policy.models import ConfidenceTable


class MixTest(TestCase):
    """Test cases for residual mixtures."""

    def setUp(self):
        self.beta = TabularPolicy([[0.5, 0.5]])
        self.rho = TabularPolicy([[0.9, 0.1]])

    def test_zero_confidence_returns_behavior(self):
        """Test that lambda = 0 gives pi = beta."""
        residual = mix(self.beta, self.rho, ConfidenceTable.zeros(1, 2))
        np.testing.assert_allclose(residual.mixed.probs, self.beta.probs, atol=1e-15)

    def test_full_confidence_returns_candidate(self):
        """Test that lambda = 1 gives pi = rho."""
        residual = mix(self.beta, self.rho, ConfidenceTable.constant(1, 2, 1.0))
        np.testing.assert_allclose(residual.mixed.probs, self.rho.probs, atol=1e-15)

    def test_worked_example(self):
        """Test the (0.7, 0.3) mixture."""
        residual = mix(self.beta, self.rho, ConfidenceTable([[0.5, 0.5]]))
        np.testing.assert_allclose(residual.mixed.probs, [[0.7, 0.3]], atol=1e-12)

    def test_raw_array_accepted(self):
        """Test that a raw nested list is wrapped into a confidence table."""
        residual = mix(self.beta, self.rho, [[0.5, 0.5]])
        self.assertIsInstance(residual.confidence, ConfidenceTable)

    def test_infeasible_confidence_rejected(self):
        """Test per-state diagnostics on an equality violation."""
        with self.assertRaises(ConstraintViolationError) as context:
            mix(self.beta, self.rho, ConfidenceTable([[1.0, 0.0]]))
        self.assertEqual(context.exception.states, [0])
        self.assertAlmostEqual(abs(context.exception.residuals[0]), 0.4)

    def test_state_constant_is_convex_combination(self):
        """Test that a state-constant lambda reproduces (1 - c) beta + c rho."""
        rng = np.random.default_rng(0)
        beta, rho = random_policy(rng, 4, 3), random_policy(rng, 4, 3)
        residual = mix(beta, rho, ConfidenceTable.constant(4, 3, 0.3))
        np.testing.assert_allclose(residual.mixed.probs, 0.7 * beta.probs + 0.3 * rho.probs, atol=1e-12)

    def test_random_feasible_mixtures_are_distributions(self):
        """Test that random feasible confidences always give valid rows."""
        rng = np.random.default_rng(1)
        for _ in range(50):
            beta, rho = random_policy(rng, 5, 4), random_policy(rng, 5, 4)
            lam = random_feasible_confidence(rng, beta, rho)
            self.assertTrue(validate_confidence(lam, beta, rho).passed)
            probs = mix(beta, rho, lam).mixed.probs
            self.assertLessEqual(np.abs(probs.sum(axis=1) - 1.0).max(), 1e-9)
            self.assertGreaterEqual(probs.min(), 0.0)


class ValidateConfidenceTest(TestCase):
    """Test cases for constraint reports."""

    def setUp(self):
        self.beta = TabularPolicy([[0.5, 0.5], [0.2, 0.8]])
        self.rho = TabularPolicy([[0.9, 0.1], [0.6, 0.4]])

    def test_state_constant_passes(self):
        """Test that any state-constant lambda is feasible."""
        for level in (0.0, 0.25, 1.0):
            report = validate_confidence(ConfidenceTable.constant(2, 2, level), self.beta, self.rho)
            self.assertTrue(report.passed)

    def test_reported_residual(self):
        """Test that a residual of 0.1 is reported and fails."""
        lam = np.array([[0.25, 0.0], [0.5, 0.5]])
        report = validate_confidence(lam, self.beta, self.rho)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.max_residual, 0.1)
        self.assertEqual(report.violating_states, [0])

    def test_box_violation_reported(self):
        """Test that raw entries outside [0, 1] are reported rather than raised."""
        report = validate_confidence([[1.2, 1.2], [0.0, 0.0]], self.beta, self.rho)
        self.assertAlmostEqual(report.box_violation, 0.2)
        self.assertFalse(report.passed)

    def test_residual_formula(self):
        """Test the per-state equality residual."""
        residuals = equality_residuals(ConfidenceTable([[1.0, 0.0], [0.0, 0.0]]), self.beta, self.rho)
        np.testing.assert_allclose(residuals, [-0.4, 0.0])

    def test_shape_mismatch(self):
        """Test that a confidence table of the wrong shape is rejected."""
        with self.assertRaises(DimensionMismatchError):
            validate_confidence(ConfidenceTable.zeros(3, 2), self.beta, self.rho)

    def test_table_rejects_out_of_box(self):
        """Test that confidence tables themselves enforce [0, 1]."""
        with self.assertRaises(InvalidModelError):
            ConfidenceTable([[1.5, 0.0]])


class ExtendTabularTest(TestCase):
    """Test cases for lifting batch confidences to a table."""

    def test_empty_batch(self):
        """Test that an empty batch gives the all-zero table."""
        lam = extend_tabular([], Batch.from_transitions([]), 3, 2)
        np.testing.assert_array_equal(lam.lam, np.zeros((3, 2)))

    def test_full_coverage(self):
        """Test that covering every pair reproduces the input table."""
        table = np.array([[0.1, 0.2], [0.3, 0.4]])
        pairs = [(0, 0), (0, 1), (1, 0), (1, 1)]
        lam = extend_tabular(table.reshape(-1), pairs, 2, 2)
        np.testing.assert_array_equal(lam.lam, table)

    def test_partial_coverage(self):
        """Test that unseen pairs are exactly zero and seen pairs are copied."""
        batch = Batch.from_transitions([(0, 1, 0.0, 1), (2, 0, 1.0, 0), (0, 1, 0.0, 2)])
        lam = extend_tabular([0.6, 0.9, 0.6], batch, 3, 2)
        expected = np.zeros((3, 2))
        expected[0, 1], expected[2, 0] = 0.6, 0.9
        np.testing.assert_array_equal(lam.lam, expected)

    def test_conflicting_duplicates(self):
        """Test that one pair with two values is rejected."""
        with self.assertRaises(ConstraintViolationError):
            extend_tabular([0.2, 0.3], [(0, 0), (0, 0)], 1, 2)

    def test_length_mismatch(self):
        """Test that values and pairs must align."""
        with self.assertRaises(DimensionMismatchError):
            extend_tabular([0.2], [(0, 0), (0, 1)], 1, 2)

    def test_mix_keeps_behavior_off_batch(self):
        """Test that states absent from the batch keep pi = beta."""
        beta = TabularPolicy([[0.5, 0.5], [0.3, 0.7]])
        rho = TabularPolicy([[0.9, 0.1], [0.9, 0.1]])
        lam = extend_tabular([0.5, 0.5], [(0, 0), (0, 1)], 2, 2)
        residual = mix(beta, rho, lam)
        np.testing.assert_allclose(residual.mixed.probs[1], beta.probs[1], atol=1e-15)
