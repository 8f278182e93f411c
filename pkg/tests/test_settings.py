import importlib
import os
from unittest import TestCase, mock

from brpo_lab import settings


class SettingsTest(TestCase):
    """Test cases for environment-driven settings."""

    def tearDown(self):
        importlib.reload(settings)

    def test_default_lists(self):
        """Test that the seed and epsilon defaults are cast to typed lists."""
        with mock.patch.dict(os.environ):
            os.environ.pop('BRPO_DEFAULT_SEEDS', None)
            os.environ.pop('BRPO_DEFAULT_EPSILONS', None)
            os.environ.pop('BRPO_EVAL_INTERVAL', None)
            importlib.reload(settings)
        self.assertEqual(settings.DEFAULT_SEEDS, [0, 1, 2, 3, 4])
        self.assertEqual(settings.DEFAULT_EPSILONS, [1.0, 0.5, 0.25, 0.15, 0.05])
        self.assertEqual(settings.EVAL_INTERVAL, 1000)

    def test_comma_separated_override(self):
        """Test that comma-separated environment values are split, stripped and cast."""
        with mock.patch.dict(os.environ, {'BRPO_DEFAULT_SEEDS': '7, 8,', 'BRPO_DEFAULT_EPSILONS': '0.1 ,1'}):
            importlib.reload(settings)
        self.assertEqual(settings.DEFAULT_SEEDS, [7, 8])
        self.assertEqual(settings.DEFAULT_EPSILONS, [0.1, 1.0])
