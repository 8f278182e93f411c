"""
Exact evaluation of the conservative improvement bounds.

Every expectation over d_beta or d_beta(.|s0) is an occupancy-weighted sum
computed from linear solves, so a certification either holds or fails
deterministically.
"""

import logging

import numpy as np
from scipy.special import logsumexp, rel_entr

from brpo_lab.exceptions import SupportMismatchError
from .identities import GapTerms
from .models import (
    BoundReport,
    Certification,
    LagrangianTerms,
    PinskerTerms,
    ResidualBound,
    VanillaBound,
    WeightedBound,
)

logger = logging.getLogger(__name__)


def _gap_terms(mdp, beta, rho, lam, terms):
    if terms is not None:
        return terms
    return GapTerms(mdp, beta, rho, lam)


def _row_divergence(p, q, reference):
    """
    Per-state KL(p || q); raises when q vanishes where p does not.
    reference names the direction in the error message.
    """
    divergence = rel_entr(p, q)
    undefined = ~np.isfinite(divergence)
    if undefined.any():
        state, action = (int(i) for i in np.argwhere(undefined)[0])
        raise SupportMismatchError(
            f"{reference} undefined at (s={state}, a={action}): support mismatch",
            state=state,
            action=action,
        )
    # rel_entr rows can dip below zero by float noise.
    return np.clip(divergence.sum(axis=1), 0.0, None)


def kappa(beta, g):
    """kappa_g(s) = 1 + log E_{a ~ beta}[exp(g(s, a)^2)] per state."""
    return 1.0 + logsumexp(np.square(g), b=beta.probs, axis=1)


def vanilla_cpi_bound(mdp, beta, rho, lam, U, terms=None):
    """
    Classic CPI lower bound with an arbitrary baseline U:

        rhs = L~ / (1 - gamma) - 2 gamma / (1 - gamma)^2 * eps * E_{d_beta}[sqrt(KL(beta || rho) / 2)]
    """
    terms = _gap_terms(mdp, beta, rho, lam, terms)
    baseline = np.asarray(getattr(U, 'values', U), dtype=np.float64)
    # dU(s, a) = E_{s'}[R(s, a) + gamma U(s') - U(s)]
    shaped = mdp.reward + mdp.gamma * mdp.transition @ baseline - baseline[:, None]
    surrogate = float(terms.behavior_occupancy @ (terms.deviation * shaped).sum(axis=1))
    epsilon = float(np.abs((terms.pi.probs * shaped).sum(axis=1)).max())
    divergence = _row_divergence(beta.probs, rho.probs, 'KL(beta || rho)')
    kl_term = float(terms.behavior_occupancy @ np.sqrt(divergence / 2.0))

    gamma = mdp.gamma
    rhs = surrogate / (1.0 - gamma) - 2.0 * gamma / (1.0 - gamma) ** 2 * epsilon * kl_term
    return VanillaBound(surrogate=surrogate, epsilon=epsilon, kl_term=kl_term, rhs=float(rhs))


def _residual_parts(terms):
    occupancy = terms.behavior_occupancy
    l_prime = float(occupancy @ (terms.deviation * terms.behavior_advantage).sum(axis=1))
    l_double_prime = float(occupancy @ terms.abs_deviation.sum(axis=1))
    return l_prime, l_double_prime, terms.l_triple_prime()


def residual_cpi_bound(mdp, beta, rho, lam, terms=None):
    """
    Residual improvement bound built from the behavior advantage:

        rhs = (L' - gamma / (1 - gamma) * L'' * max_s0 L'''(s0)) / (1 - gamma)
    """
    terms = _gap_terms(mdp, beta, rho, lam, terms)
    l_prime, l_double_prime, l_triple_prime = _residual_parts(terms)
    gamma = mdp.gamma
    worst = float(l_triple_prime.max())
    rhs = (l_prime - gamma / (1.0 - gamma) * l_double_prime * worst) / (1.0 - gamma)
    return ResidualBound(
        l_prime=l_prime,
        l_double_prime=l_double_prime,
        l_triple_prime=[float(value) for value in l_triple_prime],
        max_l_triple_prime=worst,
        rhs=float(rhs),
    )


def lagrangian_objective(mdp, beta, rho, lam, terms=None):
    """
    Start-averaged relaxation of the residual bound: the max over start
    states is replaced by the P0-expectation of L'''.
    """
    terms = _gap_terms(mdp, beta, rho, lam, terms)
    l_prime, l_double_prime, l_triple_prime = _residual_parts(terms)
    gamma = mdp.gamma
    expected = float(mdp.start @ l_triple_prime)
    objective = (l_prime - gamma / (1.0 - gamma) * l_double_prime * expected) / (1.0 - gamma)
    return LagrangianTerms(expected_l_triple_prime=expected, objective=float(objective))


def pinsker_terms(mdp, beta, rho, lam, terms=None):
    """
    KL-based relaxations of L'' and E_P0[L'''] via the weighted Pinsker
    inequality. Both directions are reported; neither is asserted.
    """
    terms = _gap_terms(mdp, beta, rho, lam, terms)
    divergence = _row_divergence(rho.probs, beta.probs, 'KL(rho || beta)')
    kappa_lambda = kappa(beta, lam.lam)
    kappa_abs_adv = kappa(beta, np.abs(terms.behavior_advantage) * lam.lam)
    occupancy = terms.behavior_occupancy

    _, l_double_prime, l_triple_prime = _residual_parts(terms)
    return PinskerTerms(
        kappa_lambda=[float(value) for value in kappa_lambda],
        kappa_abs_adv_lambda=[float(value) for value in kappa_abs_adv],
        l_double_prime_tilde=float(occupancy @ np.sqrt(kappa_lambda * divergence / 2.0)),
        l_triple_prime_tilde=float(occupancy @ np.sqrt(kappa_abs_adv * divergence / 2.0)),
        l_double_prime=l_double_prime,
        expected_l_triple_prime=float(mdp.start @ l_triple_prime),
    )


def weighted_bound(mdp, beta, rho, lam, mu, W=None, terms=None):
    """
    Bound with the weighted advantage W = (1 - mu) A_beta + mu A_pi. The
    penalty shrinks by (1 - mu) and vanishes at mu = 1, where the bound is
    the exact gap.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    terms = _gap_terms(mdp, beta, rho, lam, terms)
    if W is None:
        weighted = (1.0 - mu) * terms.behavior_advantage + mu * terms.target_advantage
    else:
        weighted = np.asarray(getattr(W, 'values', W), dtype=np.float64)
    _, l_double_prime, l_triple_prime = _residual_parts(terms)
    l_prime_mu = float(terms.behavior_occupancy @ (terms.deviation * weighted).sum(axis=1))
    gamma = mdp.gamma
    penalty = gamma * (1.0 - mu) / (1.0 - gamma) * l_double_prime * float(l_triple_prime.max())
    return WeightedBound(mu=float(mu), l_prime_mu=l_prime_mu, rhs=float((l_prime_mu - penalty) / (1.0 - gamma)))


def bound_report(mdp, beta, rho, lam, value_tables=None, mus=(0.0, 0.5, 1.0), tol=None):
    """
    Assemble every bound of one instance and certify each against the exact
    gap J_pi - J_beta. value_tables are the baselines U of the vanilla
    bound; V_beta and V_pi are used when none are given.
    """
    terms = GapTerms(mdp, beta, rho, lam)
    if value_tables is None:
        value_tables = [terms.behavior_values, terms.target_values]
    exact_gap = terms.exact_gap
    extra = {} if tol is None else {'tol': tol}

    report = BoundReport(exact_gap=exact_gap)
    for index, baseline in enumerate(value_tables):
        bound = vanilla_cpi_bound(mdp, beta, rho, lam, baseline, terms=terms)
        report.vanilla.append(bound)
        report.certifications.append(Certification(f'vanilla_u{index}', bound.rhs, exact_gap, **extra))

    report.residual = residual_cpi_bound(mdp, beta, rho, lam, terms=terms)
    report.certifications.append(Certification('residual', report.residual.rhs, exact_gap, **extra))
    report.lagrangian = lagrangian_objective(mdp, beta, rho, lam, terms=terms)
    report.pinsker = pinsker_terms(mdp, beta, rho, lam, terms=terms)
    for mu in mus:
        bound = weighted_bound(mdp, beta, rho, lam, mu, terms=terms)
        report.weighted.append(bound)
        report.certifications.append(Certification(f'weighted_mu{mu:g}', bound.rhs, exact_gap, **extra))

    failed = [item.name for item in report.certifications if not item.passed]
    if failed:
        logger.error(f"Bound certification failed for {failed} (exact gap {exact_gap:.6e})")
    return report
