"""
Closed-form candidate update: the relative-softmax twist of the behavior
policy and its state-dependent temperature.
"""

import numpy as np
from scipy.special import softmax

from brpo_lab.exceptions import InvalidModelError
from mdp_core.models import TabularPolicy
from value_gap.bounds import kappa


def _table(values):
    return np.asarray(getattr(values, 'values', getattr(values, 'lam', values)), dtype=np.float64)


def temperatures(beta, lam, adv_beta, gamma, kappa_max=None, decay_eps=None, iteration=0):
    """
    tau(s) = gamma max{kappa_lam(s), kappa_|A|lam(s)} / (2 - 2 gamma) for every
    state, after capping each kappa at kappa_max and decaying it by
    decay_eps ** iteration when configured.
    """
    confidence = _table(lam)
    advantage = _table(adv_beta)
    kappas = np.stack([kappa(beta, confidence), kappa(beta, np.abs(advantage) * confidence)])
    if kappa_max is not None:
        kappas = np.minimum(kappas, kappa_max)
    if decay_eps is not None:
        kappas = kappas * decay_eps ** iteration
    return gamma * kappas.max(axis=0) / (2.0 - 2.0 * gamma)


def temperature(beta, lam, adv_beta, state, gamma, kappa_max=None, decay_eps=None, iteration=0):
    """Temperature of a single state."""
    return float(temperatures(beta, lam, adv_beta, gamma, kappa_max, decay_eps, iteration)[state])


def candidate_policy(beta, adv, lam, tau):
    """
    rho(a|s) proportional to beta(a|s) exp(lam(s, a) adv(s, a) / tau(s)).

    Computed in log space; actions outside beta's support keep probability 0.
    """
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (beta.n_states,))
    if np.any(tau <= 0.0) or not np.all(np.isfinite(tau)):
        raise InvalidModelError(f"temperatures must be positive, got min {tau.min()}")
    exponent = _table(lam) * _table(adv) / tau[:, None]
    with np.errstate(divide='ignore'):
        logits = np.log(beta.probs) + exponent
    probs = softmax(logits, axis=1)
    probs[~beta.support] = 0.0
    return TabularPolicy.normalized(probs)
