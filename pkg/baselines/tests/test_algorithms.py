import numpy as np
from pydantic import ValidationError
from scipy.special import rel_entr
from unittest import TestCase

from baselines.algorithms import (
    BASELINES,
    batch_q_policy,
    behavior_cloning,
    brpo_constant,
    kl_q_policy,
    spibb_policy,
)
from baselines.models import BaselineConfig
from brpo_lab.exceptions import EmptyBatchError
from datagen.models import Batch
from mdp_core.evaluation import expected_return, q_and_advantage
from mdp_core.models import FiniteMdp, TabularPolicy
from tests.factories import chain2

# Every (s, a) pair of the swap chain: (s, a, r, s').
CHAIN2_PAIRS = [(0, 0, 0.0, 0), (0, 1, 0.0, 1), (1, 0, 1.0, 1), (1, 1, 1.0, 0)]


def bandit_batch():
    """Single-state, three-action batch with rewards 0.1, 0.5 and 0.3."""
    return Batch.from_transitions([(0, 0, 0.1, 0), (0, 1, 0.5, 0), (0, 2, 0.3, 0)])


class BehaviorCloningTest(TestCase):
    """Test cases for behavior cloning."""

    def test_known_beta(self):
        """Test that a known behavior policy is returned as is."""
        beta = TabularPolicy([[0.2, 0.8]])
        self.assertIs(behavior_cloning(Batch.from_transitions([]), 1, 2, known_beta=beta), beta)

    def test_counting(self):
        """Test frequencies 2/3 and 1/3 for actions {0, 0, 1}."""
        batch = Batch.from_transitions([(0, 0, 0.0, 0), (0, 0, 0.0, 0), (0, 1, 0.0, 0)])
        pi = behavior_cloning(batch, 2, 2)
        np.testing.assert_allclose(pi.probs[0], [2 / 3, 1 / 3])
        np.testing.assert_allclose(pi.probs[1], [0.5, 0.5])

    def test_empty(self):
        """Test that an empty batch without beta is rejected."""
        with self.assertRaises(EmptyBatchError):
            behavior_cloning(Batch.from_transitions([]), 2, 2)


class BatchQTest(TestCase):
    """Test cases for greedy planning on the empirical model."""

    def test_full_coverage(self):
        """Test the optimal actions on the swap chain."""
        pi = batch_q_policy(Batch.from_transitions(CHAIN2_PAIRS), BaselineConfig(), 2, 2, 0.5)
        np.testing.assert_array_equal(pi.probs, [[0.0, 1.0], [1.0, 0.0]])

    def test_unvisited_rows(self):
        """Test that unvisited states pick the lowest action index."""
        batch = Batch.from_transitions([(0, 1, 1.0, 0)])
        pi = batch_q_policy(batch, BaselineConfig(), 3, 2, 0.5)
        np.testing.assert_array_equal(pi.probs[1:], [[1.0, 0.0], [1.0, 0.0]])
        self.assertEqual(pi.probs[0, 1], 1.0)


class KlQTest(TestCase):
    """Test cases for KL-regularized Q."""

    def setUp(self):
        self.beta = TabularPolicy([[0.5, 0.3, 0.2]])

    def test_large_weight(self):
        """Test that a large KL weight returns beta."""
        config = BaselineConfig(kl_weight=1e6, critic={'tol': 1e-7})
        pi = kl_q_policy(bandit_batch(), self.beta, config, 0.5)
        self.assertLess(0.5 * np.abs(pi.probs - self.beta.probs).sum(), 1e-3)

    def test_small_weight(self):
        """Test that a vanishing KL weight returns the greedy optimal policy."""
        beta = TabularPolicy.uniform(2, 2)
        pi = kl_q_policy(Batch.from_transitions(CHAIN2_PAIRS), beta, BaselineConfig(kl_weight=1e-6), 0.5)
        greedy = np.array([[0.0, 1.0], [1.0, 0.0]])
        self.assertLess(0.5 * np.abs(pi.probs - greedy).sum(axis=1).max(), 1e-3)

    def test_divergence_decreases(self):
        """Test that KL(pi || beta) decreases as the KL weight grows."""
        divergences = []
        for weight in (0.01, 0.03, 0.1, 0.3):
            pi = kl_q_policy(bandit_batch(), self.beta, BaselineConfig(kl_weight=weight), 0.5)
            divergences.append(rel_entr(pi.probs, self.beta.probs).sum())
        self.assertTrue(all(a > b for a, b in zip(divergences, divergences[1:])))


class SpibbTest(TestCase):
    """Test cases for SPIBB-style bootstrapping."""

    def setUp(self):
        self.beta = TabularPolicy([[0.4, 0.6], [0.3, 0.7]])
        self.batch = Batch.from_transitions(CHAIN2_PAIRS * 2 + [(0, 0, 0.0, 0)] * 4)

    def test_all_uncertain(self):
        """Test that a threshold above every count returns beta."""
        config = BaselineConfig(spibb_mode='count', spibb_threshold=100.0)
        np.testing.assert_array_equal(spibb_policy(self.batch, self.beta, config, 0.5).probs, self.beta.probs)

    def test_all_certain(self):
        """Test that a zero threshold reproduces batch Q."""
        config = BaselineConfig(spibb_threshold=0.0)
        np.testing.assert_allclose(
            spibb_policy(self.batch, self.beta, config, 0.5).probs,
            batch_q_policy(self.batch, config, 2, 2, 0.5).probs,
            atol=1e-12,
        )

    def test_mixed_certainty(self):
        """Test that uncertain pairs keep beta's mass and the rest goes to the certain argmax."""
        # Counts 3, 3, 1: with a threshold of 2 only action 2 is uncertain.
        batch = Batch.from_transitions([(0, 0, 0.1, 0)] * 3 + [(0, 1, 0.5, 0)] * 3 + [(0, 2, 0.3, 0)])
        beta = TabularPolicy([[0.5, 0.3, 0.2]])
        config = BaselineConfig(spibb_mode='count', spibb_threshold=2.0)
        pi = spibb_policy(batch, beta, config, 0.5)
        np.testing.assert_allclose(pi.probs, [[0.0, 0.8, 0.2]], atol=1e-12)

    def test_single_certain_action(self):
        """Test that a lone certain action keeps its own mass."""
        # Counts: (0, 0) -> 6, every other pair -> 2; a half fraction makes only (0, 0) certain.
        pi = spibb_policy(self.batch, self.beta, BaselineConfig(spibb_threshold=0.5), 0.5)
        np.testing.assert_allclose(pi.probs, self.beta.probs, atol=1e-15)
        config = BaselineConfig(spibb_mode='count', spibb_threshold=2.0)
        pi = spibb_policy(self.batch, self.beta, config, 0.5)
        np.testing.assert_allclose(pi.probs, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


class BrpoConstantTest(TestCase):
    """Test cases for constant-confidence BRPO."""

    def setUp(self):
        self.mdp = chain2()
        self.beta = TabularPolicy([[0.6, 0.4], [0.3, 0.7]])
        self.advantage = q_and_advantage(self.mdp, self.beta)[1]
        self.batch = Batch.from_transitions(CHAIN2_PAIRS)

    def test_zero_confidence(self):
        """Test that const_lambda = 0 returns beta."""
        residual = brpo_constant(self.batch, self.beta, BaselineConfig(const_lambda=0.0), 0.5, advantage=self.advantage)
        np.testing.assert_allclose(residual.mixed.probs, self.beta.probs, atol=1e-15)

    def test_full_confidence(self):
        """Test that const_lambda = 1 returns the candidate itself."""
        residual = brpo_constant(self.batch, self.beta, BaselineConfig(const_lambda=1.0), 0.5, advantage=self.advantage)
        np.testing.assert_allclose(residual.mixed.probs, residual.candidate.probs, atol=1e-12)

    def test_improves_on_swap_chain(self):
        """Test J_pi >= J_beta with the exact advantage at const_lambda = 0.5."""
        residual = brpo_constant(self.batch, self.beta, BaselineConfig(), 0.5, advantage=self.advantage)
        self.assertGreaterEqual(expected_return(self.mdp, residual.mixed), expected_return(self.mdp, self.beta) - 1e-9)


class RegistryTest(TestCase):
    """Test cases for the CLI registry."""

    def test_names(self):
        """Test that every CLI name maps to a callable returning a valid policy."""
        beta = TabularPolicy.uniform(2, 2)
        batch = Batch.from_transitions(CHAIN2_PAIRS)
        self.assertEqual(sorted(BASELINES), ['batch_q', 'bc', 'brpo_c', 'kl_q', 'spibb'])
        for name, run in BASELINES.items():
            pi = run(batch, beta, BaselineConfig(algo=name), 0.5)
            np.testing.assert_allclose(pi.probs.sum(axis=1), 1.0, atol=1e-9, err_msg=name)

    def test_invalid_config(self):
        """Test that invalid baseline settings raise ValidationError."""
        for kwargs in ({'kl_weight': 0.0}, {'const_lambda': 2.0}, {'spibb_threshold': 1.5}, {'algo': 'bear'}):
            with self.assertRaises(ValidationError):
                BaselineConfig(**kwargs)


class ConservativeMdpTest(TestCase):
    """Test cases on a zero-reward MDP where no baseline can do worse than beta."""

    def test_zero_reward(self):
        """Test that every policy returns 0 when rewards vanish."""
        mdp = FiniteMdp(reward=np.zeros((2, 2)), transition=chain2().transition, start=[1.0, 0.0], gamma=0.5)
        batch = Batch.from_transitions([(s, a, 0.0, sp) for s, a, _, sp in CHAIN2_PAIRS])
        for name, run in BASELINES.items():
            pi = run(batch, TabularPolicy.uniform(2, 2), BaselineConfig(), 0.5)
            self.assertEqual(expected_return(mdp, pi), 0.0)
