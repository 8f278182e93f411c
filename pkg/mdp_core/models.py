"""
Tabular value types shared by every app: the finite MDP, stochastic
policies, value/Q/advantage tables and discounted occupancy measures.

All types are immutable after construction; arrays are stored read-only.
"""

from dataclasses import dataclass, field

import numpy as np

from brpo_lab import settings
from brpo_lab.exceptions import DimensionMismatchError, InvalidModelError


def _frozen_array(values, ndim, name):
    """Return a read-only float64 copy of values with the expected rank."""
    array = np.array(values, dtype=np.float64)
    if array.ndim != ndim:
        raise DimensionMismatchError(
            f"{name} must have {ndim} dimensions, got shape {array.shape}",
            expected=ndim,
            actual=array.ndim,
        )
    if not np.all(np.isfinite(array)):
        raise InvalidModelError(f"{name} contains non-finite entries")
    array.setflags(write=False)
    return array


def _clip_dust(array, tol):
    """Clip float dust below zero, reject anything more negative than tol."""
    if array.size and array.min() < -tol:
        raise InvalidModelError(f"negative probability {array.min():.3e}")
    if array.size and array.min() < 0.0:
        array = np.clip(array, 0.0, None)
    return array


@dataclass(frozen=True)
class FiniteMdp:
    """
    Finite discounted MDP (S, A, R, T, P0, gamma) with declared reward bound.

    reward[s, a] in [0, r_max], transition[s, a, s'] row-stochastic,
    start[s] a distribution, gamma in [0, 1). coordinates optionally maps
    every state to a point used by nearest-neighbour confidence lookups.
    """
    reward: np.ndarray
    transition: np.ndarray
    start: np.ndarray
    gamma: float
    r_max: float = 1.0
    coordinates: np.ndarray = None
    name: str = ''

    def __post_init__(self):
        tol = settings.PROBABILITY_TOL
        reward = _frozen_array(self.reward, 2, 'reward')
        transition = _clip_dust(np.array(_frozen_array(self.transition, 3, 'transition')), tol)
        start = _clip_dust(np.array(_frozen_array(self.start, 1, 'start')), tol)
        n_states, n_actions = reward.shape

        if transition.shape != (n_states, n_actions, n_states):
            raise DimensionMismatchError(
                f"transition shape {transition.shape} does not match reward shape {reward.shape}",
                expected=(n_states, n_actions, n_states),
                actual=transition.shape,
            )
        if start.shape != (n_states,):
            raise DimensionMismatchError(
                f"start has {start.shape[0]} entries for {n_states} states",
                expected=n_states,
                actual=start.shape[0],
            )
        row_error = np.abs(transition.sum(axis=2) - 1.0).max()
        if row_error > tol:
            raise InvalidModelError(f"transition rows deviate from 1 by {row_error:.3e}")
        if abs(start.sum() - 1.0) > tol:
            raise InvalidModelError(f"start distribution sums to {start.sum():.15f}")
        if not 0.0 <= float(self.gamma) < 1.0:
            raise InvalidModelError(f"gamma must lie in [0, 1), got {self.gamma}")
        if float(self.r_max) <= 0.0:
            raise InvalidModelError(f"r_max must be positive, got {self.r_max}")
        if reward.min() < 0.0 or reward.max() > float(self.r_max):
            raise InvalidModelError(
                f"rewards must lie in [0, {self.r_max}], got [{reward.min()}, {reward.max()}]"
            )

        transition.setflags(write=False)
        start.setflags(write=False)
        object.__setattr__(self, 'reward', reward)
        object.__setattr__(self, 'transition', transition)
        object.__setattr__(self, 'start', start)
        object.__setattr__(self, 'gamma', float(self.gamma))
        object.__setattr__(self, 'r_max', float(self.r_max))

        if self.coordinates is not None:
            coordinates = np.array(self.coordinates, dtype=np.float64)
            if coordinates.ndim == 1:
                coordinates = coordinates[:, None]
            if coordinates.shape[0] != n_states:
                raise DimensionMismatchError(
                    f"coordinates cover {coordinates.shape[0]} states, expected {n_states}",
                    expected=n_states,
                    actual=coordinates.shape[0],
                )
            coordinates.setflags(write=False)
            object.__setattr__(self, 'coordinates', coordinates)

    @property
    def n_states(self):
        return self.reward.shape[0]

    @property
    def n_actions(self):
        return self.reward.shape[1]

    @property
    def absorbing(self):
        """Boolean mask of states that every action maps back to themselves."""
        diagonal = self.transition[np.arange(self.n_states), :, np.arange(self.n_states)]
        return np.all(np.abs(diagonal - 1.0) <= settings.PROBABILITY_TOL, axis=1)

    def __str__(self):
        label = self.name or 'mdp'
        return f"{label} (|S|={self.n_states}, |A|={self.n_actions}, gamma={self.gamma})"


@dataclass(frozen=True)
class TabularPolicy:
    """Stochastic policy pi(a|s) stored as an |S| x |A| row-stochastic table."""
    probs: np.ndarray

    def __post_init__(self):
        tol = settings.PROBABILITY_TOL
        probs = _clip_dust(np.array(_frozen_array(self.probs, 2, 'policy')), tol)
        row_error = np.abs(probs.sum(axis=1) - 1.0).max() if probs.size else 0.0
        if row_error > tol:
            raise InvalidModelError(f"policy rows deviate from 1 by {row_error:.3e}")
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def uniform(cls, n_states, n_actions):
        """Uniformly random policy."""
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions):
        """One-hot policy selecting actions[s] at every state s."""
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.shape[0], n_actions))
        probs[np.arange(actions.shape[0]), actions] = 1.0
        return cls(probs)

    @classmethod
    def normalized(cls, table):
        """Build a policy from a nonnegative table by renormalizing its rows."""
        table = np.clip(np.asarray(table, dtype=np.float64), 0.0, None)
        return cls(table / table.sum(axis=1, keepdims=True))

    @property
    def n_states(self):
        return self.probs.shape[0]

    @property
    def n_actions(self):
        return self.probs.shape[1]

    @property
    def support(self):
        return self.probs > 0.0

    def has_full_support(self):
        return bool(np.all(self.support))

    def check_dimensions(self, n_states, n_actions, name='policy'):
        """Raise DimensionMismatchError unless the table is n_states x n_actions."""
        if self.probs.shape != (n_states, n_actions):
            raise DimensionMismatchError(
                f"{name} has shape {self.probs.shape}, expected {(n_states, n_actions)}",
                expected=(n_states, n_actions),
                actual=self.probs.shape,
            )


@dataclass(frozen=True)
class ValueTable:
    """State values V(s)."""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_array(self.values, 1, 'values'))


@dataclass(frozen=True)
class QTable:
    """State-action values Q(s, a)."""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_array(self.values, 2, 'q-values'))


@dataclass(frozen=True)
class AdvantageTable:
    """Advantages A(s, a) = Q(s, a) - V(s)."""
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_array(self.values, 2, 'advantages'))

    def centering_residual(self, pi):
        """Largest |sum_a pi(a|s) A(s, a)| over states."""
        return float(np.abs((pi.probs * self.values).sum(axis=1)).max())


@dataclass(frozen=True)
class OccupancyMeasure:
    """
    Discounted state (and state-action) visitation of a policy from a start
    distribution. With normalized=True the (1 - gamma) factor is applied and
    the state measure sums to one.
    """
    state: np.ndarray
    state_action: np.ndarray
    start: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'state', _frozen_array(self.state, 1, 'occupancy'))
        object.__setattr__(self, 'state_action', _frozen_array(self.state_action, 2, 'occupancy'))
        object.__setattr__(self, 'start', _frozen_array(self.start, 1, 'start'))


@dataclass(frozen=True)
class EmpiricalModel:
    """
    Maximum-likelihood tabular model estimated from a batch, with the visit
    counts it was built from. unsupported marks (s, a) pairs never observed,
    whose transitions default to uniform and rewards to zero.
    """
    mdp: FiniteMdp
    counts: np.ndarray
    unsupported: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)
        unsupported = counts == 0
        unsupported.setflags(write=False)
        object.__setattr__(self, 'unsupported', unsupported)

    @property
    def state_counts(self):
        return self.counts.sum(axis=1)
