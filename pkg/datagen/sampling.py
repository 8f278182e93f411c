"""
Batch generation by simulating the behavior policy.
"""

import logging

import numpy as np

from brpo_lab import settings
from mdp_core.evaluation import check_policy
from .models import Batch

logger = logging.getLogger(__name__)


def _draw(cumulative, uniform):
    """Index sampled from a cumulative row, clamped against float dust at the end."""
    return min(int(np.searchsorted(cumulative, uniform, side='right')), cumulative.shape[-1] - 1)


def generate_batch(mdp, beta, n, seed, episode_cap=None, meta=None):
    """
    Log exactly n transitions of beta on mdp.

    Episodes start from P0 and restart after episode_cap steps or on entering
    an absorbing state. Rewards are the table values R(s, a). The batch
    depends only on (mdp, beta, n, seed).
    """
    check_policy(mdp, beta, name='behavior')
    if n < 0:
        raise ValueError(f"n must be 0 or greater, got {n}")
    episode_cap = settings.EPISODE_CAP if episode_cap is None else episode_cap
    rng = np.random.default_rng(seed)

    cumulative_policy = np.cumsum(beta.probs, axis=1)
    cumulative_transition = np.cumsum(mdp.transition, axis=2)
    cumulative_start = np.cumsum(mdp.start)
    absorbing = mdp.absorbing
    draws = rng.random((n, 2))

    states = np.empty(n, dtype=np.int64)
    actions = np.empty(n, dtype=np.int64)
    next_states = np.empty(n, dtype=np.int64)
    state, steps, episodes = _draw(cumulative_start, rng.random()), 0, 1
    for index in range(n):
        action = _draw(cumulative_policy[state], draws[index, 0])
        next_state = _draw(cumulative_transition[state, action], draws[index, 1])
        states[index], actions[index], next_states[index] = state, action, next_state
        steps += 1
        if steps >= episode_cap or absorbing[next_state]:
            state, steps = _draw(cumulative_start, rng.random()), 0
            episodes += 1
        else:
            state = next_state

    header = {
        'n': n,
        'seed': seed,
        'gamma': mdp.gamma,
        'r_max': mdp.r_max,
        'n_states': mdp.n_states,
        'n_actions': mdp.n_actions,
        'episode_cap': episode_cap,
        'behavior': beta.probs.tolist(),
    }
    header.update(meta or {})
    logger.info(f"Generated {n} transitions over {episodes} episodes on {mdp.name or 'mdp'} (seed {seed})")
    return Batch(
        states=states,
        actions=actions,
        rewards=mdp.reward[states, actions],
        next_states=next_states,
        meta=header,
    )
