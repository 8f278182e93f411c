"""
Comparison algorithms on the batch: behavior cloning, batch Q-learning,
KL-regularized Q, SPIBB-style bootstrapping and constant-confidence BRPO.
"""

import logging

import numpy as np
from scipy.special import logsumexp, softmax

from brpo_lab.exceptions import ConvergenceError, EmptyBatchError
from brpo_solver.candidate import candidate_policy, temperatures
from critic.estimators import batch_advantage, mixed_fixed_point
from mdp_core.evaluation import bellman_q, empirical_mdp, greedy_actions
from mdp_core.models import TabularPolicy
from residual_policy.mixing import mix
from residual_policy.models import ConfidenceTable

logger = logging.getLogger(__name__)


def behavior_cloning(batch, n_states, n_actions, known_beta=None):
    """
    Known beta when given, else empirical action frequencies per visited
    state and uniform rows elsewhere.
    """
    if known_beta is not None:
        return known_beta
    if len(batch) == 0:
        raise EmptyBatchError("behavior cloning needs a batch or a known behavior policy")
    counts = np.zeros((n_states, n_actions))
    np.add.at(counts, (batch.states, batch.actions), 1.0)
    unvisited = counts.sum(axis=1) == 0
    if unvisited.any():
        logger.warning(f"Behavior cloning: {int(unvisited.sum())} unvisited states get uniform rows")
    counts[unvisited] = 1.0
    return TabularPolicy.normalized(counts)


def _optimal_q(model, config):
    critic = config.critic
    n_states, n_actions = model.mdp.n_states, model.mdp.n_actions
    q_values, _ = mixed_fixed_point(model, TabularPolicy.uniform(n_states, n_actions), 1.0,
                                    sweeps=critic.sweeps, tol=critic.tol)
    return q_values.values


def batch_q_policy(batch, config, n_states, n_actions, gamma, r_max=1.0):
    """Greedy policy on Q* of the empirical model, ties to the lowest action."""
    model = empirical_mdp(batch, n_states, n_actions, gamma, r_max=r_max)
    return TabularPolicy.deterministic(greedy_actions(_optimal_q(model, config)), n_actions)


def kl_q_policy(batch, beta, config, gamma, r_max=1.0):
    """
    Soft Q iteration with a behavior prior on the empirical model:

        V(s) = alpha log sum_a beta(a|s) exp(Q(s, a) / alpha)
        Q    = R + gamma T V

    returning pi(a|s) proportional to beta(a|s) exp(Q(s, a) / alpha).
    """
    alpha = config.kl_weight
    model = empirical_mdp(batch, beta.n_states, beta.n_actions, gamma, r_max=r_max).mdp
    values = np.zeros(model.n_states)
    change = np.inf
    for _ in range(config.critic.sweeps):
        q_values = bellman_q(model, values)
        updated = alpha * logsumexp(q_values / alpha, axis=1, b=beta.probs)
        change = float(np.abs(updated - values).max())
        values = updated
        if change <= config.critic.tol:
            break
    else:
        raise ConvergenceError(f"soft Q iteration stopped with change {change:.3e}", residual=change,
                               iterations=config.critic.sweeps)
    q_values = bellman_q(model, values)
    with np.errstate(divide='ignore'):
        logits = np.log(beta.probs) + q_values / alpha
    return TabularPolicy.normalized(softmax(logits, axis=1))


def spibb_policy(batch, beta, config, gamma, r_max=1.0):
    """
    Keep beta's mass on uncertain pairs (visit count below the threshold)
    and move the mass of the certain pairs onto the certain action with the
    highest empirical Q*.
    """
    model = empirical_mdp(batch, beta.n_states, beta.n_actions, gamma, r_max=r_max)
    q_values = _optimal_q(model, config)
    if config.spibb_mode == 'fraction':
        minimum_count = config.spibb_threshold * model.counts.max()
    else:
        minimum_count = config.spibb_threshold
    certain = model.counts >= minimum_count

    probs = np.array(beta.probs)
    for state in range(beta.n_states):
        if not certain[state].any():
            continue
        mass = probs[state, certain[state]].sum()
        probs[state, certain[state]] = 0.0
        best = int(np.argmax(np.where(certain[state], q_values[state], -np.inf)))
        probs[state, best] += mass
    return TabularPolicy(probs)


def brpo_constant(batch, beta, config, gamma, r_max=1.0, advantage=None):
    """
    One relative-softmax step with the constant confidence const_lambda,
    mixed back with beta. The advantage defaults to the batch critic.
    """
    if advantage is None:
        advantage = batch_advantage(batch, beta, config.critic, gamma, r_max=r_max)
    lam = ConfidenceTable.constant(beta.n_states, beta.n_actions, config.const_lambda)
    tau = temperatures(beta, lam, advantage, gamma)
    rho = candidate_policy(beta, advantage, lam, tau)
    return mix(beta, rho, lam)


def _run_bc(batch, beta, config, gamma, r_max=1.0, advantage=None):
    return behavior_cloning(batch, beta.n_states, beta.n_actions)


def _run_batch_q(batch, beta, config, gamma, r_max=1.0, advantage=None):
    return batch_q_policy(batch, config, beta.n_states, beta.n_actions, gamma, r_max=r_max)


def _run_kl_q(batch, beta, config, gamma, r_max=1.0, advantage=None):
    return kl_q_policy(batch, beta, config, gamma, r_max=r_max)


def _run_spibb(batch, beta, config, gamma, r_max=1.0, advantage=None):
    return spibb_policy(batch, beta, config, gamma, r_max=r_max)


def _run_brpo_constant(batch, beta, config, gamma, r_max=1.0, advantage=None):
    return brpo_constant(batch, beta, config, gamma, r_max=r_max, advantage=advantage).mixed


# CLI name -> callable(batch, beta, config, gamma, r_max, advantage) returning a TabularPolicy.
BASELINES = {
    'bc': _run_bc,
    'batch_q': _run_batch_q,
    'kl_q': _run_kl_q,
    'spibb': _run_spibb,
    'brpo_c': _run_brpo_constant,
}
