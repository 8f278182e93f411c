import numpy as np
from pydantic import ValidationError
from unittest import TestCase

from brpo_lab.exceptions import InvalidModelError
from brpo_solver.candidate import candidate_policy, temperature, temperatures
from brpo_solver.models import SolverConfig
from mdp_core.models import TabularPolicy


class TemperatureTest(TestCase):
    """Test cases for the state-dependent temperature."""

    def setUp(self):
        self.beta = TabularPolicy([[0.5, 0.5]])
        self.lam = np.ones((1, 2))
        self.adv = np.array([[1.0, -1.0]])

    def test_zero_confidence(self):
        """Test tau = gamma / (2 - 2 gamma) when lambda vanishes."""
        self.assertAlmostEqual(temperature(self.beta, np.zeros((1, 2)), self.adv, 0, 0.5), 0.5, places=15)

    def test_unit_confidence(self):
        """Test kappa = 2 and tau = 1 for lambda = 1, A = (1, -1), gamma = 0.5."""
        self.assertAlmostEqual(temperature(self.beta, self.lam, self.adv, 0, 0.5), 1.0, places=12)

    def test_cap(self):
        """Test that kappa_max = 1.5 caps tau at 0.75."""
        self.assertAlmostEqual(temperature(self.beta, self.lam, self.adv, 0, 0.5, kappa_max=1.5), 0.75, places=12)

    def test_decay(self):
        """Test that the decay multiplies kappa by decay_eps ** iteration."""
        tau = temperature(self.beta, self.lam, self.adv, 0, 0.5, decay_eps=0.5, iteration=2)
        self.assertAlmostEqual(tau, 0.25, places=12)

    def test_per_state(self):
        """Test that temperatures are computed state by state."""
        beta = TabularPolicy([[0.5, 0.5], [0.2, 0.8]])
        lam = np.array([[1.0, 1.0], [0.0, 0.0]])
        adv = np.array([[1.0, -1.0], [0.4, -0.1]])
        np.testing.assert_allclose(temperatures(beta, lam, adv, 0.5), [1.0, 0.5], atol=1e-12)


class CandidatePolicyTest(TestCase):
    """Test cases for the relative-softmax candidate."""

    def setUp(self):
        self.beta = TabularPolicy([[0.5, 0.5], [0.1, 0.9]])

    def test_zero_confidence(self):
        """Test that lambda = 0 returns beta."""
        rho = candidate_policy(self.beta, np.ones((2, 2)), np.zeros((2, 2)), 1.0)
        np.testing.assert_allclose(rho.probs, self.beta.probs, atol=1e-15)

    def test_zero_advantage(self):
        """Test that a zero advantage returns beta."""
        rho = candidate_policy(self.beta, np.zeros((2, 2)), np.ones((2, 2)), 1.0)
        np.testing.assert_allclose(rho.probs, self.beta.probs, atol=1e-15)

    def test_twist(self):
        """Test rho = (e, 1/e) / (e + 1/e) for lambda = 1, A = (1, -1), tau = 1."""
        beta = TabularPolicy([[0.5, 0.5]])
        rho = candidate_policy(beta, np.array([[1.0, -1.0]]), np.ones((1, 2)), 1.0)
        expected = np.array([np.e, 1.0 / np.e]) / (np.e + 1.0 / np.e)
        np.testing.assert_allclose(rho.probs[0], expected, atol=1e-12)
        self.assertAlmostEqual(rho.probs[0, 0], 0.8808, places=4)

    def test_twist_maximizes_regularized_gain(self):
        """Test the twist against a grid maximization of E_rho[lam A] - tau KL(rho || beta)."""
        beta = TabularPolicy([[0.5, 0.5]])
        rho = candidate_policy(beta, np.array([[1.0, -1.0]]), np.ones((1, 2)), 1.0)
        grid = np.linspace(1e-4, 1.0 - 1e-4, 9999)
        gain = grid - (1.0 - grid) - (grid * np.log(grid / 0.5) + (1.0 - grid) * np.log((1.0 - grid) / 0.5))
        self.assertAlmostEqual(grid[np.argmax(gain)], rho.probs[0, 0], delta=1e-4)

    def test_support(self):
        """Test that the candidate never leaves beta's support."""
        beta = TabularPolicy([[0.0, 0.3, 0.7]])
        rho = candidate_policy(beta, np.array([[5.0, 1.0, -1.0]]), np.ones((1, 3)), 0.5)
        self.assertEqual(rho.probs[0, 0], 0.0)
        self.assertAlmostEqual(rho.probs.sum(), 1.0, places=12)

    def test_extreme_exponents(self):
        """Test that large exponents stay finite."""
        rho = candidate_policy(self.beta, np.array([[800.0, -800.0], [0.0, 900.0]]), np.ones((2, 2)), 1e-3)
        self.assertTrue(np.all(np.isfinite(rho.probs)))
        np.testing.assert_allclose(rho.probs, [[1.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_nonpositive_temperature(self):
        """Test that tau <= 0 is rejected."""
        with self.assertRaises(InvalidModelError):
            candidate_policy(self.beta, np.ones((2, 2)), np.ones((2, 2)), 0.0)


class SolverConfigTest(TestCase):
    """Test cases for solver configuration validation."""

    def test_defaults(self):
        """Test the documented defaults."""
        config = SolverConfig()
        self.assertEqual(config.iterations, 20)
        self.assertEqual(config.mu, 0.9)
        self.assertEqual(config.qp_method, 'active_set')
        self.assertEqual(config.qp_ridge, 1e-6)

    def test_invalid_values(self):
        """Test that out-of-range settings raise ValidationError."""
        for kwargs in ({'kappa_max': 0.0}, {'decay_eps': 1.0}, {'mu': 1.5}, {'qp_method': 'newton'},
                       {'qp_ridge': -1.0}, {'iterations': -1}, {'unknown': 1}):
            with self.assertRaises(ValidationError, msg=str(kwargs)):
                SolverConfig(**kwargs)
