import pytest
from unittest import TestCase, mock

from harness.metrics import VERIFY_COLUMNS
from harness.verification import SUITES, instance_record, random_instance, run_trial, summarize, trial_rng
from mdp_core.evaluation import expected_return
from residual_policy.mixing import mix


class SuiteTest(TestCase):
    """Test cases for the certification suites on a few random instances."""

    def run_suite(self, suite, trials=3, seed=7):
        rows = []
        for trial in range(trials):
            rows.extend(run_trial(suite, seed, trial))
        return rows

    def assert_all_pass(self, rows):
        failed = [row for row in rows if not row['pass']]
        self.assertEqual(failed, [])

    def test_identities(self):
        """Test that the three value-gap forms agree and the objective anchors vanish."""
        rows = self.run_suite('identities')
        self.assert_all_pass(rows)
        self.assertEqual({row['bound_name'] for row in rows},
                         {'diff_value', 'anchor_same_candidate', 'anchor_zero_confidence'})
        self.assertLessEqual(max(row['residual'] for row in rows if row['bound_name'] == 'diff_value'), 1e-8)

    def test_bounds(self):
        """Test that every certified bound stays below the exact gap."""
        rows = self.run_suite('bounds')
        self.assert_all_pass(rows)
        checks = {row['bound_name'] for row in rows}
        self.assertTrue({'vanilla_u0', 'vanilla_u5', 'residual', 'weighted_mu0.5', 'vanilla_exact_at_target'} <= checks)
        self.assertGreaterEqual(min(row['slack'] for row in rows), -1e-9)

    def test_qp(self):
        """Test the exact solvers against the brute-force grid."""
        rows = self.run_suite('qp')
        self.assert_all_pass(rows)
        gaps = [row['residual'] for row in rows if row['bound_name'].endswith('_vs_brute_force')]
        self.assertEqual(len(gaps), 6)
        self.assertLessEqual(max(gaps), 1e-6)

    def test_proofs(self):
        """Test the matrix facts behind the proofs."""
        rows = self.run_suite('proofs')
        self.assert_all_pass(rows)
        self.assertEqual(len(rows), 12)

    @pytest.mark.slow
    def test_full_certification(self):
        """Test the documented trial counts of every suite."""
        for suite, trials in (('identities', 100), ('bounds', 200), ('qp', 50), ('proofs', 100)):
            self.assert_all_pass(self.run_suite(suite, trials=trials))

    def test_row_layout(self):
        """Test that every row reads exact_gap >= rhs with slack = exact_gap - rhs."""
        for suite in SUITES:
            for row in run_trial(suite, 1, 4):
                self.assertEqual(row['suite'], suite)
                self.assertEqual(row['instance_id'], 4)
                self.assertIsInstance(row['pass'], bool)
                self.assertAlmostEqual(row['slack'], row['exact_gap'] - row['rhs'], delta=1e-15)
                self.assertEqual(row['pass'], row['slack'] >= -1e-9)
                self.assertLessEqual(set(VERIFY_COLUMNS), set(row))

    def test_bound_rows_carry_the_exact_gap(self):
        """Test that bound rows hold J_pi - J_beta as exact_gap and the bound as rhs."""
        mdp, beta, rho, lam = random_instance(trial_rng(1, 0))
        gap = expected_return(mdp, mix(beta, rho, lam).mixed) - expected_return(mdp, beta)
        rows = {row['bound_name']: row for row in run_trial('bounds', 1, 0)}
        residual = rows['residual']
        self.assertAlmostEqual(residual['exact_gap'], gap, delta=1e-10)
        self.assertLessEqual(residual['rhs'], residual['exact_gap'] + 1e-9)
        self.assertEqual(rows['weighted_mu0.5']['exact_gap'], residual['exact_gap'])

    def test_tolerance_rows(self):
        """Test that a residual check is written as -residual >= -tolerance."""
        row = next(row for row in run_trial('proofs', 1, 0) if row['bound_name'] == 'resolvent_identity')
        self.assertEqual(row['rhs'], -row['tolerance'])
        self.assertEqual(row['exact_gap'], -row['residual'])
        self.assertTrue(row['pass'])

    def test_reproducible(self):
        """Test that a (seed, trial) pair always draws the same instance."""
        self.assertEqual(run_trial('identities', 3, 2), run_trial('identities', 3, 2))
        self.assertNotEqual(run_trial('proofs', 3, 2), run_trial('proofs', 4, 2))

    def test_unknown_suite(self):
        """Test that an unknown suite name is rejected."""
        with self.assertRaises(ValueError):
            run_trial('speed', 0, 0)

    def test_failures_are_rows(self):
        """Test that a failing check is reported, not raised."""
        with mock.patch('harness.verification.diff_value_identity', return_value={'max_deviation': 1.0}):
            rows = run_trial('identities', 0, 0)
        failed = [row['bound_name'] for row in rows if not row['pass']]
        self.assertEqual(failed, ['diff_value'])


class SummarizeTest(TestCase):
    """Test cases for suite summaries."""

    def test_counts(self):
        """Test row and failure counts and the smallest slack per bound."""
        rows = [
            {'bound_name': 'a', 'slack': 0.1, 'pass': True},
            {'bound_name': 'a', 'slack': -0.3, 'pass': False},
            {'bound_name': 'b', 'slack': 1.0, 'pass': True},
        ]
        self.assertEqual(summarize(rows), (3, 1, {'a': -0.3, 'b': 1.0}))

    def test_instance_record(self):
        """Test the per-instance document written next to the CSV."""
        rows = run_trial('identities', 2, 5)
        record = instance_record('identities', 2, 5, rows)
        self.assertEqual((record['instance_id'], record['suite'], record['seed']), (5, 'identities', 2))
        self.assertTrue(record['passed'])
        self.assertEqual(record['checks'], rows)
