"""
Advantage estimation: the exact behavior advantage, the mixed on/off-policy
Bellman fixed point and the weighted advantage built from it.
"""

import logging

import numpy as np

from brpo_lab.exceptions import ConfigurationError, ConvergenceError
from mdp_core.evaluation import bellman_q, check_policy, empirical_mdp, q_and_advantage
from mdp_core.models import AdvantageTable, QTable, ValueTable

logger = logging.getLogger(__name__)


def _mdp(model):
    """Accept a FiniteMdp or an EmpiricalModel wrapping one."""
    return getattr(model, 'mdp', model)


def advantage_behavior(model, beta):
    """A_beta = Q_beta - V_beta by exact linear solve on the given model."""
    return q_and_advantage(_mdp(model), beta)[1]


def mixed_fixed_point(model, beta, mu, sweeps=100000, tol=1e-10):
    """
    Fixed point of

        Q(s, a) = R(s, a) + gamma sum_s' T(s'|s, a) V(s')
        V(s)    = (1 - mu) sum_a beta(a|s) Q(s, a) + mu max_a Q(s, a)

    by successive sweeps until the sup-norm change of V is at most tol.
    The operator is a gamma-contraction for every mu in [0, 1].
    """
    mdp = _mdp(model)
    check_policy(mdp, beta, name='behavior')
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    values = np.zeros(mdp.n_states)
    change = np.inf
    for sweep in range(1, sweeps + 1):
        q_values = bellman_q(mdp, values)
        updated = (1.0 - mu) * (beta.probs * q_values).sum(axis=1) + mu * q_values.max(axis=1)
        change = float(np.abs(updated - values).max())
        values = updated
        if change <= tol:
            logger.debug(f"Mixed fixed point (mu={mu}) converged after {sweep} sweeps")
            return QTable(bellman_q(mdp, values)), ValueTable(values)
    raise ConvergenceError(
        f"mixed fixed point did not reach tol {tol:g} in {sweeps} sweeps (last change {change:.3e})",
        residual=change,
        iterations=sweeps,
    )


def weighted_advantage(model, beta, mu, sweeps=100000, tol=1e-10):
    """W(s, a) = Q_mu(s, a) - V_mu(s) at the mixed fixed point; mu = 0 gives A_beta."""
    q_values, values = mixed_fixed_point(model, beta, mu, sweeps=sweeps, tol=tol)
    return AdvantageTable(q_values.values - values.values[:, None])


def batch_advantage(batch, beta, config, gamma, r_max=1.0):
    """Weighted advantage on the maximum-likelihood model of the batch."""
    model = empirical_mdp(batch, beta.n_states, beta.n_actions, gamma, r_max=r_max)
    return weighted_advantage(model, beta, config.mu, sweeps=config.sweeps, tol=config.tol)


def estimate_advantage(config, beta, mdp=None, batch=None):
    """
    Advantage table for the learner: the weighted advantage on the true MDP
    when config.source is exact_model, on the batch model otherwise.
    """
    if config.source == 'exact_model':
        if mdp is None:
            raise ConfigurationError("exact_model critic needs the true MDP")
        return weighted_advantage(mdp, beta, config.mu, sweeps=config.sweeps, tol=config.tol)
    if batch is None:
        raise ConfigurationError("empirical_model critic needs a batch")
    gamma = mdp.gamma if mdp is not None else batch.meta.get('gamma')
    if gamma is None:
        raise ConfigurationError("empirical_model critic needs gamma from the MDP or the batch metadata")
    r_max = mdp.r_max if mdp is not None else batch.meta.get('r_max', 1.0)
    return batch_advantage(batch, beta, config, gamma, r_max=r_max)
