"""
Euclidean projections onto the per-state confidence set

    {lam : sum_a lam_a (rho_a - beta_a) = 0,  0 <= lam <= 1}.
"""

import logging

import numpy as np

from residual_policy.models import ConfidenceTable

logger = logging.getLogger(__name__)


def _clipped(label, weights, multiplier):
    return np.clip(label - multiplier * weights, 0.0, 1.0)


def project_confidence(label, beta_row, rho_row):
    """
    Exact projection of label onto the confidence set of one state.

    The minimizer is clip(label - m w, 0, 1) with w = rho - beta and m the
    root of the nonincreasing piecewise-linear map
    phi(m) = w . clip(label - m w, 0, 1), found between consecutive
    breakpoints.
    """
    label = np.asarray(label, dtype=np.float64)
    weights = np.asarray(rho_row, dtype=np.float64) - np.asarray(beta_row, dtype=np.float64)
    moving = weights != 0.0
    if not moving.any():
        return np.clip(label, 0.0, 1.0)

    def phi(multiplier):
        return float(weights @ _clipped(label, weights, multiplier))

    breakpoints = np.unique(np.concatenate([
        label[moving] / weights[moving],
        (label[moving] - 1.0) / weights[moving],
    ]))
    values = np.array([phi(point) for point in breakpoints])
    if values[0] <= 0.0:
        # phi is constant left of the first breakpoint.
        return _clipped(label, weights, breakpoints[0])
    if values[-1] >= 0.0:
        return _clipped(label, weights, breakpoints[-1])
    upper = int(np.argmax(values <= 0.0))
    lower = upper - 1
    left, right = breakpoints[lower], breakpoints[upper]
    # phi is linear on [left, right].
    multiplier = left + values[lower] * (right - left) / (values[lower] - values[upper])
    projected = _clipped(label, weights, multiplier)
    # Remove the last rounding residue along the free coordinates.
    free = moving & (projected > 0.0) & (projected < 1.0)
    if free.any():
        residual = weights @ projected
        correction = residual / (weights[free] @ weights[free])
        projected[free] = np.clip(projected[free] - correction * weights[free], 0.0, 1.0)
    return projected


def heuristic_projection(label, beta_row, rho_row, tol=1e-9):
    """
    One-shot multiplier formula clip(label + (rho - beta) m, 0, 1) with
    m = -(rho - beta) . label / |rho - beta|^2.

    Returns the heuristic point and whether it differs from the exact
    projection by more than tol.
    """
    label = np.asarray(label, dtype=np.float64)
    weights = np.asarray(rho_row, dtype=np.float64) - np.asarray(beta_row, dtype=np.float64)
    norm = weights @ weights
    if norm == 0.0:
        heuristic = np.clip(label, 0.0, 1.0)
    else:
        heuristic = np.clip(label - (weights @ label) / norm * weights, 0.0, 1.0)
    exact = project_confidence(label, beta_row, rho_row)
    differs = bool(np.abs(heuristic - exact).max() > tol)
    if differs:
        logger.warning(f"Heuristic projection differs from the exact one by {np.abs(heuristic - exact).max():.3e}")
    return heuristic, differs


def dykstra_project(point, equality, iterations=10000, tol=1e-12):
    """
    Dykstra's alternating projection of point onto {x : equality x = 0} intersected
    with the unit box. Converges to the exact Euclidean projection.
    """
    point = np.asarray(point, dtype=np.float64)
    equality = np.atleast_2d(np.asarray(equality, dtype=np.float64))
    pseudo_inverse = np.linalg.pinv(equality @ equality.T) if equality.size else None

    def onto_subspace(vector):
        if pseudo_inverse is None:
            return vector
        return vector - equality.T @ (pseudo_inverse @ (equality @ vector))

    current = point.copy()
    subspace_increment = np.zeros_like(point)
    box_increment = np.zeros_like(point)
    for _ in range(iterations):
        on_subspace = onto_subspace(current + subspace_increment)
        subspace_increment = current + subspace_increment - on_subspace
        updated = np.clip(on_subspace + box_increment, 0.0, 1.0)
        box_increment = on_subspace + box_increment - updated
        change = np.abs(updated - current).max()
        current = updated
        if change <= tol:
            break
    return current


def project_rows(table, beta, rho, states=None):
    """Exact projection of every row (or the listed states) of a confidence table."""
    table = np.array(getattr(table, 'lam', table), dtype=np.float64)
    rows = range(table.shape[0]) if states is None else states
    for state in rows:
        table[state] = project_confidence(table[state], beta.probs[state], rho.probs[state])
    return table


def carry_confidence(lam, beta, rho):
    """
    Move a confidence table built for an earlier candidate onto the feasible
    set of rho, state by state.
    """
    return ConfidenceTable(project_rows(lam, beta, rho))
