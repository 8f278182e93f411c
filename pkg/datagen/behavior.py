"""
Behavior policies at a target quality, with epsilon-greedy exploration.
"""

import logging

from scipy.optimize import bisect

from brpo_lab.exceptions import ConfigurationError
from mdp_core.evaluation import expected_return, optimal_policy
from mdp_core.models import TabularPolicy

logger = logging.getLogger(__name__)

QUALITY_TOL = 1e-3


def _interpolate(first, second, weight):
    return TabularPolicy.normalized(weight * first.probs + (1.0 - weight) * second.probs)


def base_policy(mdp, quality, tol=QUALITY_TOL):
    """
    Mixture c pi* + (1 - c) uniform whose exact return meets

        quality J* + (1 - quality) J_uniform

    within tol relative. Returns (policy, c, target).
    """
    if not 0.0 < quality <= 1.0:
        raise ConfigurationError(f"quality must lie in (0, 1], got {quality}")
    optimal, _ = optimal_policy(mdp)
    uniform = TabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    j_optimal = expected_return(mdp, optimal)
    j_uniform = expected_return(mdp, uniform)
    target = quality * j_optimal + (1.0 - quality) * j_uniform
    if quality == 1.0 or j_optimal - j_uniform <= 0.0:
        return optimal, 1.0, target

    def shortfall(weight):
        return expected_return(mdp, _interpolate(optimal, uniform, weight)) - target

    weight = bisect(shortfall, 0.0, 1.0, xtol=1e-14, maxiter=200)
    policy = _interpolate(optimal, uniform, weight)
    achieved = expected_return(mdp, policy)
    if abs(achieved - target) > tol * max(abs(target), 1e-12):
        raise ConfigurationError(
            f"quality {quality} unattainable: reached J={achieved:.6g} for target {target:.6g}"
        )
    return policy, weight, target


def behavior_policy(mdp, quality, epsilon):
    """
    beta = (1 - epsilon) base + epsilon uniform, where base interpolates
    between the uniform and the optimal policy at the requested quality.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
    base, weight, target = base_policy(mdp, quality)
    uniform = TabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    beta = _interpolate(uniform, base, epsilon)
    logger.info(
        f"Behavior policy on {mdp.name or 'mdp'}: quality {quality}, optimal weight {weight:.4f}, "
        f"epsilon {epsilon}, base target J={target:.6g}"
    )
    if not beta.has_full_support():
        logger.warning("Behavior policy lacks full support; importance ratios are undefined off its support")
    return beta
