import numpy as np
import pytest

from tests.factories import always_switch, chain2, random_instance


@pytest.fixture
def chain2_mdp():
    """The two-state swap chain with gamma = 0.5."""
    return chain2()


@pytest.fixture
def switch_policy():
    """Deterministic 'always action 1' policy on the swap chain."""
    return always_switch()


@pytest.fixture
def rng():
    """Seeded generator so statistical tests are reproducible."""
    return np.random.default_rng(2024)


@pytest.fixture(params=range(5))
def feasible_instance(request):
    """A random (mdp, beta, rho, lambda) instance with feasible lambda."""
    return random_instance(request.param)
