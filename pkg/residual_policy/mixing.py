"""
Residual mixtures, the per-state confidence constraint set and the tabular
extension of batch-level confidences.
"""

import logging

import numpy as np

from brpo_lab import settings
from brpo_lab.exceptions import ConstraintViolationError, DimensionMismatchError
from mdp_core.models import TabularPolicy
from .models import ConfidenceReport, ConfidenceTable, ResidualPolicy

logger = logging.getLogger(__name__)


def _raw_table(lam):
    return lam.lam if isinstance(lam, ConfidenceTable) else np.asarray(lam, dtype=np.float64)


def _check_shapes(raw, beta, rho):
    beta.check_dimensions(rho.n_states, rho.n_actions, name='behavior')
    if raw.shape != beta.probs.shape:
        raise DimensionMismatchError(
            f"confidence shape {raw.shape} does not match policies {beta.probs.shape}",
            expected=beta.probs.shape,
            actual=raw.shape,
        )


def equality_residuals(lam, beta, rho):
    """Per-state residual sum_a lambda(s, a) (beta(a|s) - rho(a|s))."""
    return (_raw_table(lam) * (beta.probs - rho.probs)).sum(axis=1)


def validate_confidence(lam, beta, rho, tol=None):
    """
    Check lambda against the constraint set Lambda(s) of (beta, rho).

    lam may be a ConfidenceTable or a raw array (whose box violations are
    then reported too). Always returns a report; never raises for violations.
    """
    raw = _raw_table(lam)
    _check_shapes(raw, beta, rho)
    tol = settings.CONSTRAINT_TOL if tol is None else tol
    box_violation = float(max(0.0, -raw.min(), raw.max() - 1.0)) if raw.size else 0.0
    return ConfidenceReport(residuals=equality_residuals(raw, beta, rho), box_violation=box_violation, tol=tol)


def mix(beta, rho, lam, tol=None):
    """
    Materialize pi = (1 - lambda) beta + lambda rho.

    Rejects confidences outside Lambda(s) beyond tol with per-state
    diagnostics; float dust is clipped and rows renormalized.
    """
    if not isinstance(lam, ConfidenceTable):
        lam = ConfidenceTable(lam)
    report = validate_confidence(lam, beta, rho, tol=tol)
    if not report.passed:
        raise ConstraintViolationError(
            f"confidence violates the equality constraint at states {report.violating_states} "
            f"(max residual {report.max_residual:.3e})",
            residuals=report.residuals,
            states=report.violating_states,
        )
    mixed = (1.0 - lam.lam) * beta.probs + lam.lam * rho.probs
    return ResidualPolicy(
        behavior=beta,
        candidate=rho,
        confidence=lam,
        mixed=TabularPolicy.normalized(np.clip(mixed, 0.0, None)),
    )


def extend_tabular(batch_lam, pairs, n_states, n_actions):
    """
    Lift per-pair confidences to a full table: lambda(s, a) is the given
    value for every listed pair and 0 elsewhere.

    pairs is a Batch (its (s, a) samples) or a sequence of (s, a) tuples
    aligned with batch_lam. Repeated pairs must carry identical values.
    """
    if hasattr(pairs, 'states'):
        pairs = list(zip(pairs.states.tolist(), pairs.actions.tolist()))
    values = np.asarray(batch_lam, dtype=np.float64).reshape(-1)
    if len(pairs) != values.shape[0]:
        raise DimensionMismatchError(
            f"{values.shape[0]} confidence values for {len(pairs)} pairs",
            expected=len(pairs),
            actual=values.shape[0],
        )

    table = np.zeros((n_states, n_actions))
    assigned = {}
    for (state, action), value in zip(pairs, values):
        key = (int(state), int(action))
        if key in assigned and assigned[key] != value:
            raise ConstraintViolationError(
                f"conflicting confidence values {assigned[key]} and {value} for pair {key}",
                states=[key[0]],
            )
        assigned[key] = value
        table[key] = value
    return ConfidenceTable(table)


def random_feasible_confidence(rng, beta, rho):
    """
    Random lambda in Lambda(s): a state constant c plus a perturbation
    orthogonal to (rho - beta)(.|s), scaled to stay inside the box.
    """
    n_states, n_actions = beta.probs.shape
    table = np.zeros((n_states, n_actions))
    for state in range(n_states):
        direction = rho.probs[state] - beta.probs[state]
        level = rng.uniform(0.2, 0.8)
        perturbation = rng.normal(size=n_actions)
        norm = direction @ direction
        if norm > 0.0:
            perturbation -= (perturbation @ direction) / norm * direction
        # sum_a direction = 0, so the constant part is already feasible.
        scale = np.abs(perturbation).max()
        step = rng.uniform(0.0, min(level, 1.0 - level))
        table[state] = level + (step * perturbation / scale if scale > 0.0 else 0.0)
    return ConfidenceTable(np.clip(table, 0.0, 1.0))
