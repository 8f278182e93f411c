"""
Exact dynamic-programming oracles on finite MDPs.

Policy evaluation, advantages and occupancy measures are computed with
dense linear solves so that downstream bound certifications are exact.
"""

import logging

import numpy as np

from brpo_lab.exceptions import BrpoError, DimensionMismatchError, EmptyBatchError
from .models import (
    AdvantageTable,
    EmpiricalModel,
    FiniteMdp,
    OccupancyMeasure,
    QTable,
    TabularPolicy,
    ValueTable,
)

logger = logging.getLogger(__name__)

LINEAR_RESIDUAL_TOL = 1e-10


def check_policy(mdp, pi, name='policy'):
    """Raise DimensionMismatchError unless pi matches the MDP dimensions."""
    pi.check_dimensions(mdp.n_states, mdp.n_actions, name=name)


def policy_transition(mdp, pi):
    """State-to-state kernel T_pi(s'|s) = sum_a pi(a|s) T(s'|s, a)."""
    return np.einsum('sa,sat->st', pi.probs, mdp.transition)


def policy_reward(mdp, pi):
    """Expected one-step reward R_pi(s) = sum_a pi(a|s) R(s, a)."""
    return (pi.probs * mdp.reward).sum(axis=1)


def resolvent(mdp, pi):
    """Dense (I - gamma T_pi)^-1."""
    identity = np.eye(mdp.n_states)
    return np.linalg.solve(identity - mdp.gamma * policy_transition(mdp, pi), identity)


def _solve(matrix, rhs):
    """Solve a nonsingular system and check its residual."""
    try:
        solution = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as exc:
        # (I - gamma T) is nonsingular for gamma < 1.
        raise BrpoError(f"singular evaluation system: {exc}") from exc
    residual = np.abs(matrix @ solution - rhs).max()
    scale = max(1.0, np.abs(rhs).max())
    if residual > LINEAR_RESIDUAL_TOL * scale:
        raise BrpoError(f"linear solve residual {residual:.3e} above tolerance")
    return solution


def evaluate_policy(mdp, pi):
    """Solve (I - gamma T_pi) V = R_pi for the exact state values of pi."""
    check_policy(mdp, pi)
    matrix = np.eye(mdp.n_states) - mdp.gamma * policy_transition(mdp, pi)
    return ValueTable(_solve(matrix, policy_reward(mdp, pi)))


def bellman_q(mdp, values):
    """One Bellman backup Q(s, a) = R(s, a) + gamma sum_s' T(s'|s, a) V(s')."""
    return mdp.reward + mdp.gamma * mdp.transition @ np.asarray(values)


def q_and_advantage(mdp, pi):
    """Exact Q_pi and A_pi = Q_pi - V_pi."""
    values = evaluate_policy(mdp, pi).values
    q_values = bellman_q(mdp, values)
    return QTable(q_values), AdvantageTable(q_values - values[:, None])


def expected_return(mdp, pi):
    """J_pi = sum_s P0(s) V_pi(s)."""
    return float(mdp.start @ evaluate_policy(mdp, pi).values)


def _start_distribution(mdp, start):
    if start is None:
        return np.array(mdp.start)
    if np.isscalar(start) or np.ndim(start) == 0:
        state = int(start)
        if not 0 <= state < mdp.n_states:
            raise DimensionMismatchError(f"start state {state} out of range", expected=mdp.n_states, actual=state)
        distribution = np.zeros(mdp.n_states)
        distribution[state] = 1.0
        return distribution
    distribution = np.asarray(start, dtype=np.float64)
    if distribution.shape != (mdp.n_states,):
        raise DimensionMismatchError(
            f"start distribution has shape {distribution.shape}",
            expected=(mdp.n_states,),
            actual=distribution.shape,
        )
    return distribution


def occupancy(mdp, pi, start=None, normalized=True):
    """
    Discounted state(-action) occupancy of pi.

    start may be None (use P0), a state index (single-start measure
    d(.|s0)) or a distribution over states. The normalized measure is
    d = (1 - gamma) start^T (I - gamma T_pi)^-1.
    """
    check_policy(mdp, pi)
    distribution = _start_distribution(mdp, start)
    matrix = np.eye(mdp.n_states) - mdp.gamma * policy_transition(mdp, pi)
    state = _solve(matrix.T, distribution)
    if normalized:
        state = (1.0 - mdp.gamma) * state
    return OccupancyMeasure(
        state=state,
        state_action=state[:, None] * pi.probs,
        start=distribution,
        normalized=normalized,
    )


def occupancy_matrix(mdp, pi):
    """Row s0 holds the normalized occupancy d_pi(.|s0)."""
    return (1.0 - mdp.gamma) * resolvent(mdp, pi)


def value_iteration(mdp, pi, sweeps=10000, tol=0.0):
    """Iterative policy evaluation V <- R_pi + gamma T_pi V."""
    check_policy(mdp, pi)
    kernel = policy_transition(mdp, pi)
    reward = policy_reward(mdp, pi)
    values = np.zeros(mdp.n_states)
    for _ in range(sweeps):
        updated = reward + mdp.gamma * kernel @ values
        change = np.abs(updated - values).max()
        values = updated
        if change <= tol:
            break
    return ValueTable(values)


def greedy_actions(q_values):
    """Argmax per state with ties broken by the lowest action index."""
    return np.argmax(q_values, axis=1)


def optimal_policy(mdp, max_iterations=1000):
    """
    Exact planning by policy iteration.

    Returns the deterministic optimal policy (lowest-index tie-break) and its
    value table V*.
    """
    actions = np.zeros(mdp.n_states, dtype=int)
    for iteration in range(max_iterations):
        pi = TabularPolicy.deterministic(actions, mdp.n_actions)
        values = evaluate_policy(mdp, pi).values
        q_values = bellman_q(mdp, values)
        best = q_values.max(axis=1, keepdims=True)
        # Only switch when another action improves by more than float noise.
        current = q_values[np.arange(mdp.n_states), actions]
        improvable = best[:, 0] > current + 1e-12 * max(1.0, np.abs(best).max())
        if not improvable.any():
            near_best = q_values >= best - 1e-12 * max(1.0, np.abs(best).max())
            actions = np.argmax(near_best, axis=1)
            pi = TabularPolicy.deterministic(actions, mdp.n_actions)
            return pi, evaluate_policy(mdp, pi)
        actions = np.where(improvable, greedy_actions(q_values), actions)
    raise BrpoError(f"policy iteration did not stabilize after {max_iterations} iterations")


def empirical_mdp(batch, n_states, n_actions, gamma, r_max=1.0):
    """
    Maximum-likelihood model from batch counts.

    T(s'|s, a) = count(s, a, s') / count(s, a) where the pair was visited,
    uniform otherwise; R(s, a) is the mean observed reward, zero where
    unseen. The counts and the unsupported mask are returned alongside.
    """
    if len(batch) == 0:
        raise EmptyBatchError("cannot build an empirical model from an empty batch")
    states, actions = batch.states, batch.actions
    next_states, rewards = batch.next_states, batch.rewards
    for label, index, bound in (('state', states, n_states), ('action', actions, n_actions),
                                ('next state', next_states, n_states)):
        if index.min() < 0 or index.max() >= bound:
            raise DimensionMismatchError(f"batch {label} index out of range [0, {bound})", expected=bound)

    counts = np.zeros((n_states, n_actions), dtype=np.int64)
    np.add.at(counts, (states, actions), 1)
    transition_counts = np.zeros((n_states, n_actions, n_states))
    np.add.at(transition_counts, (states, actions, next_states), 1.0)
    reward_sums = np.zeros((n_states, n_actions))
    np.add.at(reward_sums, (states, actions), rewards)

    visited = counts > 0
    transition = np.full((n_states, n_actions, n_states), 1.0 / n_states)
    transition[visited] = transition_counts[visited] / counts[visited][:, None]
    reward = np.zeros((n_states, n_actions))
    reward[visited] = reward_sums[visited] / counts[visited]

    n_unsupported = int((~visited).sum())
    if n_unsupported:
        logger.warning(f"Empirical model: {n_unsupported} of {visited.size} state-action pairs unsupported")

    start = np.zeros(n_states)
    np.add.at(start, states, 1.0)
    start /= start.sum()
    model = FiniteMdp(
        reward=np.clip(reward, 0.0, r_max),
        transition=transition,
        start=start,
        gamma=gamma,
        r_max=r_max,
        name='empirical',
    )
    return EmpiricalModel(mdp=model, counts=counts)


def rollout_returns(mdp, pi, episodes, rng, horizon=None):
    """
    Monte-Carlo discounted returns of pi from P0.

    The horizon defaults to the first step where gamma^t drops below 1e-10
    times the reward scale.
    """
    check_policy(mdp, pi)
    if horizon is None:
        horizon = 1 if mdp.gamma == 0.0 else int(np.ceil(np.log(1e-10) / np.log(mdp.gamma)))
    cumulative_policy = np.cumsum(pi.probs, axis=1)
    cumulative_transition = np.cumsum(mdp.transition, axis=2)
    cumulative_start = np.cumsum(mdp.start)

    returns = np.zeros(episodes)
    states = np.minimum(np.searchsorted(cumulative_start, rng.random(episodes), side='right'), mdp.n_states - 1)
    discount = 1.0
    for _ in range(horizon):
        draws = rng.random(episodes)
        actions = (draws[:, None] >= cumulative_policy[states]).sum(axis=1)
        actions = np.minimum(actions, mdp.n_actions - 1)
        returns += discount * mdp.reward[states, actions]
        draws = rng.random(episodes)
        next_states = (draws[:, None] >= cumulative_transition[states, actions]).sum(axis=1)
        states = np.minimum(next_states, mdp.n_states - 1)
        discount *= mdp.gamma
    return returns
