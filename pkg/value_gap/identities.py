"""
Difference-value identities and the matrix identities behind the bounds.

For a feasible triple (beta, rho, lambda) with pi = beta + lambda (rho - beta):

    V_pi - V_beta = (I - gamma T_beta)^-1 dA_hat    (A_pi residual rewards)
                  = (I - gamma T_pi)^-1 dA          (A_beta residual rewards)
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from brpo_lab.exceptions import SupportMismatchError
from mdp_core.evaluation import (
    check_policy,
    evaluate_policy,
    occupancy,
    occupancy_matrix,
    policy_transition,
    q_and_advantage,
    resolvent,
)
from residual_policy.mixing import mix
from .models import ResidualReward

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-8
ROW_SUM_TOL = 1e-10


def importance_weights(beta, rho, lam):
    """
    lambda (rho - beta) / beta, with 0 where beta vanishes together with
    lambda (rho - beta); any other zero-beta pair has no defined ratio.
    """
    numerator = lam.lam * (rho.probs - beta.probs)
    zero_beta = beta.probs <= 0.0
    undefined = zero_beta & (numerator != 0.0)
    if undefined.any():
        state, action = (int(i) for i in np.argwhere(undefined)[0])
        raise SupportMismatchError(
            f"importance ratio undefined at (s={state}, a={action}): beta is 0 but lambda (rho - beta) is not",
            state=state,
            action=action,
        )
    weights = np.zeros_like(numerator)
    np.divide(numerator, beta.probs, out=weights, where=~zero_beta)
    return weights


@dataclass
class GapTerms:
    """
    Exact quantities shared by the identities and bounds of one instance,
    computed lazily and cached.
    """
    mdp: object
    beta: object
    rho: object
    lam: object

    def __post_init__(self):
        check_policy(self.mdp, self.beta, name='behavior')
        check_policy(self.mdp, self.rho, name='candidate')
        self.residual = mix(self.beta, self.rho, self.lam)
        self.lam = self.residual.confidence
        self.pi = self.residual.mixed

    @cached_property
    def weights(self):
        return importance_weights(self.beta, self.rho, self.lam)

    @cached_property
    def deviation(self):
        """lambda (rho - beta), the per-pair shift from beta to pi."""
        return self.lam.lam * (self.rho.probs - self.beta.probs)

    @cached_property
    def abs_deviation(self):
        return self.lam.lam * np.abs(self.rho.probs - self.beta.probs)

    @cached_property
    def behavior_advantage(self):
        return q_and_advantage(self.mdp, self.beta)[1].values

    @cached_property
    def target_advantage(self):
        return q_and_advantage(self.mdp, self.pi)[1].values

    @cached_property
    def behavior_values(self):
        return evaluate_policy(self.mdp, self.beta).values

    @cached_property
    def target_values(self):
        return evaluate_policy(self.mdp, self.pi).values

    @cached_property
    def behavior_occupancy(self):
        """d_beta from P0, normalized."""
        return occupancy(self.mdp, self.beta).state

    @cached_property
    def behavior_occupancy_matrix(self):
        """D_beta: row s0 is d_beta(.|s0)."""
        return occupancy_matrix(self.mdp, self.beta)

    @cached_property
    def exact_gap(self):
        return float(self.mdp.start @ (self.target_values - self.behavior_values))

    def l_triple_prime(self):
        """L'''(s0) for every start state s0."""
        per_state = (self.abs_deviation * np.abs(self.behavior_advantage)).sum(axis=1)
        return self.behavior_occupancy_matrix @ per_state


def residual_rewards(mdp, beta, rho, lam, adv, mode='behavior'):
    """
    Residual rewards dA(s) = sum_a beta (lambda (rho - beta) / beta) adv(s, a)
    together with the kernel and reward differences of the mixture.

    mode is 'behavior' when adv is A_beta and 'target' when adv is A_pi.
    """
    if mode not in ('behavior', 'target'):
        raise ValueError(f"mode must be 'behavior' or 'target', got {mode!r}")
    advantage = np.asarray(getattr(adv, 'values', adv), dtype=np.float64)
    weights = importance_weights(beta, rho, lam)
    shift = beta.probs * weights
    return ResidualReward(
        delta_a=(shift * advantage).sum(axis=1),
        delta_t=np.einsum('sa,sat->st', shift, mdp.transition),
        delta_r=(shift * mdp.reward).sum(axis=1),
        mode=mode,
    )


def diff_value_identity(mdp, beta, rho, lam, tol=IDENTITY_TOL):
    """
    Compute V_pi - V_beta three ways (direct evaluation, A_pi residual
    rewards under beta, A_beta residual rewards under pi) and report the
    pairwise sup-norm deviations.
    """
    terms = GapTerms(mdp, beta, rho, lam)
    direct = terms.target_values - terms.behavior_values

    target_rewards = residual_rewards(mdp, beta, rho, lam, terms.target_advantage, mode='target')
    behavior_rewards = residual_rewards(mdp, beta, rho, lam, terms.behavior_advantage, mode='behavior')
    identity = np.eye(mdp.n_states)
    via_behavior_kernel = np.linalg.solve(identity - mdp.gamma * policy_transition(mdp, beta), target_rewards.delta_a)
    via_target_kernel = np.linalg.solve(identity - mdp.gamma * policy_transition(mdp, terms.pi), behavior_rewards.delta_a)

    deviations = {
        'direct_vs_target_rewards': float(np.abs(direct - via_behavior_kernel).max()),
        'direct_vs_behavior_rewards': float(np.abs(direct - via_target_kernel).max()),
        'target_vs_behavior_rewards': float(np.abs(via_behavior_kernel - via_target_kernel).max()),
    }
    max_deviation = max(deviations.values())
    return {
        'direct': direct,
        'target_rewards_form': via_behavior_kernel,
        'behavior_rewards_form': via_target_kernel,
        'deviations': deviations,
        'max_deviation': max_deviation,
        'passed': max_deviation <= tol,
    }


def verify_proof_identities(mdp, beta, rho, lam, tol=IDENTITY_TOL, row_tol=ROW_SUM_TOL):
    """
    Numerically check the matrix facts used in the bound proofs:

    (i)   (I - gamma T_pi)^-1 - (I - gamma T_beta)^-1
              = sign * gamma (I - gamma T_beta)^-1 dT (I - gamma T_pi)^-1,
          with the sign that makes it hold recorded;
    (ii)  T_beta + dT is row-stochastic;
    (iii) D_beta dT 1 = 0;
    (iv)  I + D_beta dT has unit row sums.

    Report-only: failures are returned, never raised.
    """
    terms = GapTerms(mdp, beta, rho, lam)
    delta_t = residual_rewards(mdp, beta, rho, lam, terms.behavior_advantage).delta_t
    behavior_inverse = resolvent(mdp, beta)
    target_inverse = resolvent(mdp, terms.pi)
    difference = target_inverse - behavior_inverse
    product = mdp.gamma * behavior_inverse @ delta_t @ target_inverse
    residual_plus = float(np.linalg.norm(difference - product, 'fro'))
    residual_minus = float(np.linalg.norm(difference + product, 'fro'))
    sign = 1 if residual_plus <= residual_minus else -1
    identity_residual = min(residual_plus, residual_minus)

    mixed_kernel = policy_transition(mdp, beta) + delta_t
    stochastic_error = float(max(
        np.abs(mixed_kernel.sum(axis=1) - 1.0).max(),
        max(0.0, -mixed_kernel.min()),
    ))
    occupation = terms.behavior_occupancy_matrix
    zero_row_error = float(np.abs(occupation @ delta_t @ np.ones(mdp.n_states)).max())
    shifted = np.eye(mdp.n_states) + occupation @ delta_t
    unit_row_error = float(np.abs(shifted.sum(axis=1) - 1.0).max())

    checks = {
        'resolvent_identity': identity_residual <= tol,
        'mixed_kernel_stochastic': stochastic_error <= row_tol,
        'occupation_zero_rows': zero_row_error <= row_tol,
        'shifted_unit_rows': unit_row_error <= row_tol,
    }
    if not all(checks.values()):
        logger.error(f"Proof identity check failed: {checks}")
    return {
        'identity_sign': sign,
        'identity_residual': identity_residual,
        'identity_residual_other_sign': max(residual_plus, residual_minus),
        'stochastic_error': stochastic_error,
        'zero_row_error': zero_row_error,
        'unit_row_error': unit_row_error,
        'checks': checks,
        'passed': all(checks.values()),
    }
