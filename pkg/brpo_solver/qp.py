"""
Assembly and solution of the confidence quadratic program.

Coordinates are every action of each distinct batch state. Only coordinates
where rho and beta differ enter the objective or the equality rows, so the
solvers work on that reduced vector and leave the rest at 0.

The product penalty scale (h . lam)(d . lam) makes theta indefinite unless
|A_beta| is constant on the support of d. Exact methods then maximize the
true objective by minorize-maximize over the PSD majorizer
scale (alpha d d^T + h h^T / alpha), started from the warm start, from 0 and
from the best points of a scan over the level sets d . lam = t.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.linalg import eigvalsh, null_space
from scipy.optimize import linprog, minimize_scalar

from brpo_lab.exceptions import EmptyBatchError, QpError, SupportMismatchError
from .models import ConfidenceQp, SaaTerms
from .projection import dykstra_project, project_confidence

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-12
CURVATURE_TOL = 1e-12
GRADIENT_TOL = 1e-13
KKT_TOL = 1e-11
FEASIBILITY_TOL = 1e-9


def build_confidence_qp(batch, beta, rho, adv, gamma):
    """
    Assemble the program for candidate rho over the batch states.

    Each distinct state carries the weight q = |B_s| n_s / |B|, so the
    sample averages below count every logged visit once.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot build a confidence program from an empty batch")
    advantage = np.asarray(getattr(adv, 'values', adv), dtype=np.float64)
    states, counts = np.unique(batch.states, return_counts=True)
    n_states, n_actions = states.shape[0], beta.n_actions

    diff = rho.probs[states] - beta.probs[states]
    unsupported = (beta.probs[states] <= 0.0) & (diff != 0.0)
    if unsupported.any():
        row, action = (int(i) for i in np.argwhere(unsupported)[0])
        raise SupportMismatchError(
            f"candidate leaves the behavior support at (s={int(states[row])}, a={action})",
            state=int(states[row]),
            action=action,
        )
    weights = n_states * counts / len(batch)
    abs_adv = np.abs(advantage[states])
    linear = (weights[:, None] * diff * advantage[states]).reshape(-1)
    d = (weights[:, None] * np.abs(diff)).reshape(-1)
    h = abs_adv.reshape(-1) * d
    scale = gamma / (n_states * (1.0 - gamma))
    theta = scale * (np.outer(h, d) + np.outer(d, h))

    equality = np.zeros((n_states, n_states * n_actions))
    for row in range(n_states):
        equality[row, row * n_actions:(row + 1) * n_actions] = diff[row]
    return ConfidenceQp(
        states=states,
        n_actions=n_actions,
        n_samples=len(batch),
        gamma=float(gamma),
        weights=weights,
        diff=diff,
        abs_adv=abs_adv,
        linear=linear,
        d=d,
        h=h,
        scale=scale,
        theta=theta,
        equality=equality,
    )


def saa_terms(qp, lam_bar):
    """
    Sample averages L', L'', L''' at lam_bar and the objective
    (L' - gamma / (1 - gamma) L'' L''') / (1 - gamma), which equals the QP
    objective divided by |B_s| (1 - gamma).
    """
    lam_bar = np.asarray(lam_bar, dtype=np.float64)
    n_states = max(qp.n_states, 1)
    l_prime = float(qp.linear @ lam_bar) / n_states
    l_double_prime = float(qp.d @ lam_bar) / n_states
    l_triple_prime = float(qp.h @ lam_bar) / n_states
    gamma = qp.gamma
    objective = (l_prime - gamma / (1.0 - gamma) * l_double_prime * l_triple_prime) / (1.0 - gamma)
    return SaaTerms(l_prime, l_double_prime, l_triple_prime, float(objective))


@dataclass
class _ReducedProgram:
    """The program restricted to coordinates where rho and beta differ."""
    index: np.ndarray
    c: np.ndarray
    d: np.ndarray
    h: np.ndarray
    scale: float
    weights: np.ndarray
    blocks: list
    equality: np.ndarray

    @classmethod
    def from_qp(cls, qp):
        index = np.flatnonzero(qp.active)
        weights = qp.diff.reshape(-1)[index]
        owners = index // qp.n_actions
        blocks = [np.flatnonzero(owners == owner) for owner in np.unique(owners)]
        equality = np.zeros((len(blocks), index.shape[0]))
        for row, block in enumerate(blocks):
            equality[row, block] = weights[block]
        return cls(index, qp.linear[index], qp.d[index], qp.h[index], qp.scale, weights, blocks, equality)

    @property
    def size(self):
        return int(self.index.shape[0])

    @property
    def theta(self):
        return self.scale * (np.outer(self.h, self.d) + np.outer(self.d, self.h))

    def objective(self, x):
        return float(x @ self.c - self.scale * (self.h @ x) * (self.d @ x))

    def project(self, x):
        """Exact projection of every block onto its feasible set."""
        x = np.clip(np.array(x, dtype=np.float64), 0.0, 1.0)
        for block in self.blocks:
            x[block] = project_confidence(x[block], np.zeros(block.shape[0]), self.weights[block])
        return x

    def majorizer(self, x):
        """
        PSD curvature whose quadratic dominates the product penalty and
        touches it at x.
        """
        norm_h, norm_d = np.linalg.norm(self.h), np.linalg.norm(self.d)
        level_h, level_d = float(self.h @ x), float(self.d @ x)
        if level_h > 0.0 and level_d > 0.0:
            alpha = level_h / level_d
        elif level_d > 0.0:
            alpha = 1e-6 * norm_h / norm_d
        else:
            alpha = norm_h / norm_d
        return self.scale * (alpha * np.outer(self.d, self.d) + np.outer(self.h, self.h) / alpha)


def _face_basis(program, status):
    """Null space of the equality rows and the fixed bounds, block by block."""
    columns = []
    for block in program.blocks:
        free = block[status[block] == 0]
        if free.shape[0] < 2:
            continue
        basis = null_space(program.weights[free][None, :])
        embedded = np.zeros((program.size, basis.shape[1]))
        embedded[free] = basis
        columns.append(embedded)
    if not columns:
        return np.zeros((program.size, 0))
    return np.hstack(columns)


def _active_set(program, curvature, start, max_iterations):
    """
    Primal active-set ascent for c.x - 1/2 x^T H x with PSD H over the
    program's feasible set, from a feasible start.
    """
    c = program.c
    x = program.project(start)
    n = program.size
    status = np.zeros(n, dtype=int)
    status[x <= BOUND_TOL] = -1
    status[x >= 1.0 - BOUND_TOL] = 1
    x[status == -1] = 0.0
    x[status == 1] = 1.0
    for block in program.blocks:
        # Keep the working set independent of the equality row.
        if np.all(status[block] != 0):
            status[block[np.argmax(np.abs(program.weights[block]))]] = 0
    scale = 1.0 + np.abs(c).max() + np.abs(curvature).max()

    for _ in range(max_iterations):
        gradient = c - curvature @ x
        basis = _face_basis(program, status)
        direction = np.zeros(n)
        bounded = True
        if basis.shape[1]:
            reduced_gradient = basis.T @ gradient
            if np.abs(reduced_gradient).max() > GRADIENT_TOL * scale:
                values, vectors = np.linalg.eigh(basis.T @ curvature @ basis)
                curved = values > CURVATURE_TOL * max(1.0, values.max())
                flat = vectors[:, ~curved].T @ reduced_gradient
                if flat.size and np.abs(flat).max() > GRADIENT_TOL * scale:
                    direction = basis @ (vectors[:, ~curved] @ flat)
                    bounded = False
                else:
                    newton = vectors[:, curved] @ ((vectors[:, curved].T @ reduced_gradient) / values[curved])
                    direction = basis @ newton

        moving = np.abs(direction) > 1e-15
        if moving.any():
            limits = np.full(n, np.inf)
            rising = moving & (direction > 0.0)
            falling = moving & (direction < 0.0)
            limits[rising] = (1.0 - x[rising]) / direction[rising]
            limits[falling] = -x[falling] / direction[falling]
            blocking = int(np.argmin(limits))
            step = limits[blocking]
            if bounded and step >= 1.0:
                x = np.clip(x + direction, 0.0, 1.0)
                continue
            if not np.isfinite(step):
                break
            x = np.clip(x + max(step, 0.0) * direction, 0.0, 1.0)
            status[blocking] = 1 if direction[blocking] > 0.0 else -1
            x[blocking] = 1.0 if status[blocking] == 1 else 0.0
            continue

        fixed = np.flatnonzero(status != 0)
        if not fixed.size:
            return x
        system = np.hstack([program.equality.T, np.eye(n)[:, fixed]])
        multipliers = np.linalg.lstsq(system, gradient, rcond=None)[0][program.equality.shape[0]:]
        violation = -status[fixed] * multipliers
        worst = int(np.argmax(violation))
        if violation[worst] <= KKT_TOL * scale:
            return x
        status[fixed[worst]] = 0
    logger.warning(f"Active-set solver stopped after {max_iterations} iterations")
    return x


def _projected_gradient(program, curvature, start, tol, max_iterations):
    """
    Accelerated projected gradient ascent with step 1/L, projecting with
    Dykstra's algorithm, restarting momentum whenever the objective drops.
    """
    c = program.c
    x = program.project(start)
    if not program.size:
        return x
    largest = float(eigvalsh(curvature).max())
    lipschitz = largest if largest > CURVATURE_TOL else 1.0

    def value(point):
        return float(point @ c - 0.5 * point @ curvature @ point)

    current_value = value(x)
    momentum_point, t = x.copy(), 1.0
    restarted = False
    for _ in range(max_iterations):
        step = momentum_point + (c - curvature @ momentum_point) / lipschitz
        candidate = dykstra_project(step, program.equality, iterations=1000, tol=1e-15)
        candidate_value = value(candidate)
        if candidate_value < current_value - 1e-15 * (1.0 + abs(current_value)):
            if restarted:
                break
            momentum_point, t, restarted = x.copy(), 1.0, True
            continue
        restarted = False
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum_point = candidate + (t - 1.0) / t_next * (candidate - x)
        change = np.abs(candidate - x).max()
        x, current_value, t = candidate, candidate_value, t_next
        if change <= tol:
            break
    return program.project(x)


def _closed_form_clip(program, ridge):
    """
    Stationary point of the equality-constrained program with a ridged
    theta, clipped into the box and re-projected onto the equality rows.
    """
    n = program.size
    theta = program.theta
    if ridge == 0.0 and np.linalg.matrix_rank(theta) < n:
        raise QpError(f"theta has rank {np.linalg.matrix_rank(theta)} < {n}; set qp_ridge > 0 for closed_form_clip")
    matrix = theta + ridge * np.eye(n)
    equality = program.equality
    try:
        inverse_linear = np.linalg.solve(matrix, program.c)
        inverse_equality = np.linalg.solve(matrix, equality.T)
        multiplier = np.linalg.solve(equality @ inverse_equality, equality @ inverse_linear)
    except np.linalg.LinAlgError as exc:
        raise QpError(f"closed-form confidence system is singular: {exc}") from exc
    return program.project(inverse_linear - inverse_equality @ multiplier)


def _brute_force(program, budget, refine):
    """
    Grid search over the free coordinates of every block (the largest
    |rho - beta| entry of each block is solved from its equality row),
    followed by a shrinking pattern search down to step refine.
    """
    pivots, free = [], []
    for block in program.blocks:
        pivot = block[np.argmax(np.abs(program.weights[block]))]
        pivots.append(pivot)
        free.extend(int(j) for j in block if j != pivot)
    free = np.array(free, dtype=int)
    n_free = free.shape[0]
    if n_free == 0:
        return np.zeros(program.size)
    if n_free > 10:
        raise QpError(f"brute force is limited to 10 free coordinates, got {n_free}")

    def complete(free_values):
        points = np.zeros((free_values.shape[0], program.size))
        points[:, free] = free_values
        feasible = np.ones(free_values.shape[0], dtype=bool)
        for block, pivot in zip(program.blocks, pivots):
            others = block[block != pivot]
            points[:, pivot] = -(points[:, others] @ program.weights[others]) / program.weights[pivot]
            feasible &= (points[:, pivot] >= -BOUND_TOL) & (points[:, pivot] <= 1.0 + BOUND_TOL)
        points[:, pivots] = np.clip(points[:, pivots], 0.0, 1.0)
        values = points @ program.c - program.scale * (points @ program.h) * (points @ program.d)
        return points, np.where(feasible, values, -np.inf)

    per_axis = max(2, int(np.floor(budget ** (1.0 / n_free))))
    axis = np.linspace(0.0, 1.0, per_axis)
    mesh = np.stack(np.meshgrid(*([axis] * n_free), indexing='ij'), axis=-1).reshape(-1, n_free)
    points, values = complete(mesh)
    best = int(np.argmax(values))
    best_free, best_value = mesh[best], values[best]

    offsets = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n_free)))
    step = 1.0 / (per_axis - 1)
    while step > refine:
        step /= 2.0
        while True:
            trial = np.clip(best_free + step * offsets, 0.0, 1.0)
            _, trial_values = complete(trial)
            index = int(np.argmax(trial_values))
            if trial_values[index] <= best_value + 1e-15:
                break
            best_free, best_value = trial[index], trial_values[index]
    return complete(best_free[None, :])[0][0]


def _level_optimum(program, level):
    """
    Maximizer over the slice d . x = level, where the objective is the
    linear function (c - scale level h) . x.
    """
    zeros = np.zeros(program.equality.shape[0])
    result = linprog(
        -(program.c - program.scale * level * program.h),
        A_eq=np.vstack([program.equality, program.d]),
        b_eq=np.append(zeros, level),
        bounds=[(0.0, 1.0)] * program.size,
        method='highs',
    )
    if not result.success:
        return -np.inf, None
    point = program.project(result.x)
    return program.objective(point), point


def _level_set_seeds(program, count, keep=3):
    """
    Best slice maximizers for count levels of d . x between 0 and its
    largest feasible value, plus a bounded scalar search around the best
    level.
    """
    if count <= 0 or not program.size:
        return []
    widest = linprog(
        -program.d,
        A_eq=program.equality,
        b_eq=np.zeros(program.equality.shape[0]),
        bounds=[(0.0, 1.0)] * program.size,
        method='highs',
    )
    if not widest.success:
        return []
    levels = np.linspace(0.0, max(-widest.fun, 0.0), max(count, 2))
    seeds = [_level_optimum(program, level) for level in levels]
    best = int(np.argmax([value for value, _ in seeds]))
    low, high = levels[max(best - 1, 0)], levels[min(best + 1, len(levels) - 1)]
    if high > low:
        search = minimize_scalar(
            lambda level: -_level_optimum(program, level)[0],
            bounds=(low, high),
            method='bounded',
            options={'xatol': 1e-10},
        )
        seeds.append(_level_optimum(program, search.x))
    seeds = [item for item in seeds if item[1] is not None]
    seeds.sort(key=lambda item: -item[0])
    return [point for _, point in seeds[:keep]]


def _majorize_maximize(program, inner, starts, tol, max_iterations):
    """Best minorize-maximize fixed point over the given starts."""
    best, best_value = None, -np.inf
    visited = []
    for start in starts:
        x = program.project(start)
        if any(np.abs(x - other).max() <= 1e-12 for other in visited):
            continue
        visited.append(x)
        value = program.objective(x)
        for _ in range(max_iterations):
            candidate = inner(program.majorizer(x), x)
            candidate_value = program.objective(candidate)
            if candidate_value <= value + tol * (1.0 + abs(value)):
                if candidate_value > value:
                    x, value = candidate, candidate_value
                break
            x, value = candidate, candidate_value
        if value > best_value:
            best, best_value = x, value
    return best


def solve_confidence(qp, config, warm_start=None):
    """
    Maximize lam . linear - 1/2 lam^T theta lam subject to the equality rows
    and the unit box with config.qp_method. Returns one confidence per QP
    coordinate; a degenerate program returns 0.
    """
    lam_bar = np.zeros(qp.dimension)
    if not qp.dimension or qp.degenerate:
        return lam_bar
    program = _ReducedProgram.from_qp(qp)
    if not program.size:
        return lam_bar
    start = np.zeros(program.size) if warm_start is None else np.asarray(warm_start, dtype=np.float64)[program.index]

    method = config.qp_method
    if method == 'closed_form_clip':
        solution = _closed_form_clip(program, config.qp_ridge)
    elif method == 'brute_force':
        solution = _brute_force(program, config.brute_force_budget, config.brute_force_refine)
    else:
        if method == 'active_set':
            inner = partial(_active_set, program, max_iterations=config.qp_max_iterations)
        else:
            inner = partial(_projected_gradient, program, tol=config.qp_tol, max_iterations=config.pg_max_iterations)
        theta_scale = max(1.0, float(np.abs(qp.theta).max()))
        if qp.is_concave(tol=1e-9 * theta_scale):
            solution = inner(program.theta, start)
        elif config.on_indefinite == 'error':
            raise QpError(f"theta is indefinite (min eigenvalue {qp.min_eigenvalue:.3e})")
        else:
            logger.warning(f"Indefinite theta (min eigenvalue {qp.min_eigenvalue:.3e}); maximizing by majorization")
            starts = [program.project(start), np.zeros(program.size)]
            starts += _level_set_seeds(program, config.global_scan)
            solution = _majorize_maximize(program, inner, starts, config.qp_tol, config.mm_max_iterations)

    lam_bar[program.index] = program.project(solution)
    residual = qp.constraint_residual(lam_bar)
    if residual > FEASIBILITY_TOL:
        raise QpError(f"{method} returned a point violating the constraints by {residual:.3e}")
    return lam_bar
