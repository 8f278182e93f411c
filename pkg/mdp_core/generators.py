"""
Random finite MDPs and policies for property sweeps.
"""

import numpy as np

from .models import FiniteMdp, TabularPolicy


def random_mdp(rng, n_states, n_actions, gamma, concentration=1.0, single_start=False):
    """
    Draw an MDP with Dirichlet transition rows, uniform [0, 1] rewards and a
    Dirichlet start distribution (or a single random start state).
    """
    transition = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    reward = rng.random((n_states, n_actions))
    if single_start:
        start = np.zeros(n_states)
        start[rng.integers(n_states)] = 1.0
    else:
        start = rng.dirichlet(np.ones(n_states))
    return FiniteMdp(reward=reward, transition=transition, start=start, gamma=gamma, r_max=1.0, name='random')


def random_policy(rng, n_states, n_actions, concentration=1.0, floor=1e-3):
    """Full-support random policy with every probability at least about floor."""
    probs = rng.dirichlet(np.full(n_actions, concentration), size=n_states)
    probs = (probs + floor) / (1.0 + n_actions * floor)
    return TabularPolicy.normalized(probs)


def random_instance_shape(rng, max_states=8, max_actions=4, gammas=(0.5, 0.9, 0.95)):
    """Random (|S|, |A|, gamma) within the sweep limits."""
    n_states = int(rng.integers(1, max_states + 1))
    n_actions = int(rng.integers(2, max_actions + 1))
    gamma = float(rng.choice(gammas))
    return n_states, n_actions, gamma
