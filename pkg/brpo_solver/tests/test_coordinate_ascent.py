import numpy as np
import pytest
from unittest import TestCase, mock

from brpo_lab.exceptions import EmptyBatchError
from brpo_solver.coordinate_ascent import coordinate_ascent, keep_improvement
from brpo_solver.models import SolverConfig
from datagen.models import Batch
from mdp_core.evaluation import expected_return, q_and_advantage
from mdp_core.generators import random_mdp, random_policy
from mdp_core.models import TabularPolicy
from residual_policy.mixing import validate_confidence
from tests.factories import state_batch


def random_run(seed, iterations, **options):
    """Coordinate ascent on a random MDP with the exact behavior advantage."""
    rng = np.random.default_rng(seed)
    n_states, n_actions = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    mdp = random_mdp(rng, n_states, n_actions, float(rng.choice([0.5, 0.9])))
    beta = random_policy(rng, n_states, n_actions)
    advantage = q_and_advantage(mdp, beta)[1]
    visits = rng.integers(0, n_states, size=int(rng.integers(3, 12)))
    batch = state_batch(visits, n_actions)
    config = SolverConfig(iterations=iterations, **options)
    return mdp, beta, batch, coordinate_ascent(batch, beta, advantage, config, mdp=mdp)


class CoordinateAscentTest(TestCase):
    """Test cases for the two-step coordinate ascent."""

    def test_zero_iterations(self):
        """Test that K = 0 returns beta with an empty trace."""
        mdp, beta, _, result = random_run(0, 0)
        np.testing.assert_allclose(result.residual.mixed.probs, beta.probs, atol=1e-15)
        self.assertEqual(result.trace.rows, [])
        self.assertAlmostEqual(expected_return(mdp, result.residual.mixed), expected_return(mdp, beta), places=12)

    def test_trace_layout(self):
        """Test one rho row and one lambda row per iteration."""
        _, _, _, result = random_run(1, 3)
        rows = result.trace.as_rows()
        self.assertEqual([row['half_step'] for row in rows], ['rho', 'lambda'] * 3)
        self.assertEqual([row['iter'] for row in rows], [1, 1, 2, 2, 3, 3])
        self.assertEqual(rows[0]['L_bar'], 0.0)
        self.assertNotEqual(rows[1]['J_exact'], '')
        self.assertEqual(set(rows[0]), {'iter', 'half_step', 'L_bar', 'Lp', 'Lpp', 'Lppp', 'J_exact'})

    def test_monotone_lambda_steps(self):
        """Test that no lambda-step lowers the sample-average objective."""
        for seed in range(8):
            _, _, _, result = random_run(seed, 6)
            for before, after in result.trace.lambda_steps():
                self.assertGreaterEqual(after, before - 1e-9, msg=f"seed {seed}")

    @pytest.mark.slow
    def test_monotone_lambda_steps_full(self):
        """Test monotone lambda-steps over 20 iterations on 20 random batches."""
        for seed in range(20):
            _, _, _, result = random_run(seed, 20)
            for before, after in result.trace.lambda_steps():
                self.assertGreaterEqual(after, before - 1e-9, msg=f"seed {seed}")

    def test_first_step_nonnegative(self):
        """Test that the first lambda-step never falls below the lambda = 0 anchor."""
        for seed in range(8):
            _, _, _, result = random_run(seed, 1)
            self.assertGreaterEqual(result.trace.rows[1].L_bar, -1e-12)

    def test_confidence_feasible(self):
        """Test that the emitted confidence is feasible and zero off the batch."""
        _, beta, batch, result = random_run(2, 4)
        self.assertTrue(validate_confidence(result.confidence, beta, result.candidate).passed)
        unseen = np.setdiff1d(np.arange(beta.n_states), batch.distinct_states())
        self.assertTrue(np.all(result.confidence.lam[unseen] == 0.0))
        np.testing.assert_allclose(result.residual.mixed.probs[unseen], beta.probs[unseen], atol=1e-12)
        np.testing.assert_allclose(result.residual.mixed.probs.sum(axis=1), 1.0, atol=1e-12)

    def test_generalized_confidence(self):
        """Test that generalization fills unseen states with feasible labels."""
        _, beta, _, result = random_run(3, 3, generalize=True, nn_metric='hamming')
        self.assertTrue(validate_confidence(result.confidence, beta, result.candidate).passed)

    def test_empty_batch(self):
        """Test that an empty batch is rejected."""
        mdp, beta, _, _ = random_run(0, 0)
        with self.assertRaises(EmptyBatchError):
            coordinate_ascent(Batch.from_transitions([]), beta, np.zeros(beta.probs.shape), SolverConfig())

    def test_evaluation_interval(self):
        """Test that exact returns are recorded every eval_interval iterations and after the last one."""
        rng = np.random.default_rng(4)
        mdp = random_mdp(rng, 3, 2, 0.9)
        beta = random_policy(rng, 3, 2)
        advantage = q_and_advantage(mdp, beta)[1]
        result = coordinate_ascent(state_batch([0, 1, 2, 1], 2), beta, advantage, SolverConfig(iterations=5),
                                   mdp=mdp, eval_interval=2)
        recorded = [row.iter for row in result.trace.rows if row.J_exact is not None]
        self.assertEqual(recorded, [2, 4, 5])

    def test_bad_evaluation_interval(self):
        """Test that a zero evaluation interval is rejected."""
        mdp, beta, batch, _ = random_run(0, 0)
        with self.assertRaises(ValueError):
            coordinate_ascent(batch, beta, np.zeros(beta.probs.shape), SolverConfig(), mdp=mdp, eval_interval=0)


class LambdaStepShiftTest(TestCase):
    """Test cases for how far one lambda-step moves the mixed policy at a high discount."""

    def run_step(self, **options):
        beta = TabularPolicy([[0.5, 0.5]])
        batch = Batch.from_transitions([(0, 0, 0.0, 0), (0, 1, 0.0, 0)])
        config = SolverConfig(iterations=1, **options)
        return coordinate_ascent(batch, beta, np.array([[1.0, -1.0]]), config, gamma=0.99)

    def test_shift_independent_of_temperature(self):
        """Test that the mixed policy moves by (1 - gamma) / (4 gamma) with or without a kappa cap."""
        expected = 0.01 / (4.0 * 0.99)
        for kappa_max in (None, 1e-2, 1e-3):
            result = self.run_step(kappa_max=kappa_max)
            shift = result.residual.mixed.probs[0, 0] - 0.5
            self.assertAlmostEqual(shift, expected, delta=1e-9, msg=f"kappa_max {kappa_max}")
            self.assertGreater(result.candidate.probs[0, 0], 0.5)

    def test_confidence_inside_bounds(self):
        """Test that the optimal confidence stays interior, so the shift is not clipped."""
        result = self.run_step()
        lam = result.confidence.lam[0]
        self.assertAlmostEqual(lam[0], lam[1], delta=1e-9)
        self.assertGreater(lam[0], 0.0)
        self.assertLess(lam[0], 1.0)


class KeepImprovementTest(TestCase):
    """Test cases for the warm-start guard of the lambda-step."""

    def setUp(self):
        self.qp = mock.Mock()
        self.carried = np.array([0.2, 0.2])
        self.solution = np.array([0.3, 0.3])

    def scores(self, solution_value, carried_value):
        self.qp.objective.side_effect = lambda x: solution_value if x is self.solution else carried_value

    def test_float_dust_keeps_solution(self):
        """Test that a shortfall at rounding level keeps the solver's point without a warning."""
        self.scores(0.125 - 2.8e-17, 0.125)
        with mock.patch('brpo_solver.coordinate_ascent.logger.warning') as warning:
            chosen = keep_improvement(self.qp, self.solution, self.carried, 1e-9, iteration=3)
        self.assertIs(chosen, self.solution)
        warning.assert_not_called()

    def test_real_drop_keeps_warm_start(self):
        """Test that a genuine drop falls back to the warm start and warns once."""
        self.scores(0.1, 0.125)
        with mock.patch('brpo_solver.coordinate_ascent.logger.warning') as warning:
            chosen = keep_improvement(self.qp, self.solution, self.carried, 1e-9, iteration=3)
        self.assertIs(chosen, self.carried)
        warning.assert_called_once()

    def test_relative_tolerance(self):
        """Test that the tolerance scales with a large warm-start objective."""
        self.scores(1e6 - 1e-4, 1e6)
        self.assertIs(keep_improvement(self.qp, self.solution, self.carried, 1e-9), self.solution)
        self.scores(1e6 - 1e-2, 1e6)
        self.assertIs(keep_improvement(self.qp, self.solution, self.carried, 1e-9), self.carried)
