"""
Two-step coordinate ascent of the batch objective: twist beta into a new
candidate with the current confidence, then re-solve the confidence program
for that candidate.
"""

import logging

import numpy as np

from brpo_lab import settings
from brpo_lab.exceptions import EmptyBatchError
from mdp_core.evaluation import expected_return
from residual_policy.mixing import extend_tabular, mix
from residual_policy.models import ConfidenceTable
from .candidate import candidate_policy, temperatures
from .generalization import build_label_set, generalized_table
from .models import CoordinateAscentTrace, SolverResult
from .projection import carry_confidence
from .qp import build_confidence_qp, saa_terms, solve_confidence

logger = logging.getLogger(__name__)


def _advantage_table(adv_source):
    return np.asarray(getattr(adv_source, 'values', adv_source), dtype=np.float64)


def keep_improvement(qp, solution, carried, tol, iteration=None):
    """
    The solver's point unless it scores below the warm start by more than
    tol relative to the warm-start objective; then the warm start.
    """
    reference = qp.objective(carried)
    if qp.objective(solution) < reference - tol * max(1.0, abs(reference)):
        logger.warning(f"Iteration {iteration}: solver fell below its warm start; keeping the carried confidence")
        return carried
    return solution


def coordinate_ascent(batch, beta, adv_source, config, gamma=None, mdp=None, eval_interval=1):
    """
    Run config.iterations rounds of the rho-step and the lambda-step.

    adv_source is the advantage table the learner trusts (exact A_beta, or
    the critic's weighted advantage). When mdp is given the trace also
    records the exact return of the residual policy every eval_interval
    iterations and after the last one. Starting from lambda = 0 the first
    rho-step twists with the constant config.init_lambda, since twisting
    with 0 reproduces beta.
    """
    if eval_interval < 1:
        raise ValueError("eval_interval must be 1 or greater")
    if len(batch) == 0:
        raise EmptyBatchError("coordinate ascent needs at least one transition")
    n_states, n_actions = beta.probs.shape
    batch.check_dimensions(n_states, n_actions)
    if gamma is None:
        gamma = mdp.gamma if mdp is not None else settings.DEFAULT_GAMMA
    advantage = _advantage_table(adv_source)
    coordinates = getattr(mdp, 'coordinates', None)

    lam = ConfidenceTable.zeros(n_states, n_actions)
    rho = beta
    residual = mix(beta, rho, lam)
    trace = CoordinateAscentTrace()
    logger.info(f"Coordinate ascent: {config.iterations} iterations, {len(batch)} transitions, qp={config.qp_method}")

    for iteration in range(1, config.iterations + 1):
        twist = lam
        if not np.any(lam.lam):
            twist = ConfidenceTable.constant(n_states, n_actions, config.init_lambda)
        tau = temperatures(beta, twist, advantage, gamma, config.kappa_max, config.decay_eps, iteration=iteration)
        rho = candidate_policy(beta, advantage, twist, tau)

        qp = build_confidence_qp(batch, beta, rho, advantage, gamma)
        carried = carry_confidence(lam, beta, rho).lam[qp.states].reshape(-1)
        before = saa_terms(qp, carried)
        trace.append(iteration, 'rho', before)

        lam_bar = solve_confidence(qp, config, warm_start=carried)
        lam_bar = keep_improvement(qp, lam_bar, carried, config.qp_tol, iteration=iteration)
        after = saa_terms(qp, lam_bar)

        if config.generalize:
            labels = build_label_set(qp, lam_bar, coordinates=coordinates, metric=config.nn_metric)
            lam = generalized_table(labels, beta, rho)
        else:
            lam = extend_tabular(lam_bar, qp.pairs, n_states, n_actions)
        residual = mix(beta, rho, lam)
        evaluate = mdp is not None and (iteration % eval_interval == 0 or iteration == config.iterations)
        j_exact = expected_return(mdp, residual.mixed) if evaluate else None
        trace.append(iteration, 'lambda', after, j_exact)
        logger.info(
            f"Iteration {iteration}: L_bar {before.objective:.6g} -> {after.objective:.6g}"
            + (f", J {j_exact:.6g}" if j_exact is not None else '')
        )

    return SolverResult(candidate=rho, confidence=lam, residual=residual, trace=trace)
