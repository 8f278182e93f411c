"""
Environment specifications and logged batches.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from brpo_lab import settings
from brpo_lab.exceptions import DimensionMismatchError


class EnvSpec(BaseModel):
    """
    Parameters of one native environment.

    chain uses n; gridworld uses width, height and slip; cliff uses width,
    height, slip and fall_penalty.
    """
    model_config = ConfigDict(extra='forbid')

    kind: Literal['chain', 'gridworld', 'cliff']
    n: int = 8
    width: int = 5
    height: int = 5
    slip: float = 0.0
    fall_penalty: float = 1.0
    gamma: float = settings.DEFAULT_GAMMA
    r_max: float = 1.0
    coordinates: Optional[List[List[float]]] = None

    @field_validator('n', 'width', 'height')
    @classmethod
    def validate_size(cls, value):
        """Validate that sizes are positive."""
        if value <= 0:
            raise ValueError("Environment sizes must be greater than 0.")
        return value

    @field_validator('slip')
    @classmethod
    def validate_slip(cls, value):
        """Validate that the slip probability lies in [0, 1)."""
        if not 0.0 <= value < 1.0:
            raise ValueError("slip must lie in [0, 1).")
        return value

    @field_validator('fall_penalty', 'r_max')
    @classmethod
    def validate_positive(cls, value):
        if value <= 0.0:
            raise ValueError("Value must be greater than 0.")
        return value

    @field_validator('gamma')
    @classmethod
    def validate_gamma(cls, value):
        """Validate that the discount lies in [0, 1)."""
        if not 0.0 <= value < 1.0:
            raise ValueError("gamma must lie in [0, 1).")
        return value

    @model_validator(mode='after')
    def validate_layout(self):
        """A cliff needs room for a start, a goal and at least one fall cell."""
        if self.kind == 'cliff' and self.width < 3:
            raise ValueError("cliff width must be at least 3.")
        if self.kind == 'chain' and self.n < 2:
            raise ValueError("chain length must be at least 2.")
        return self

    @property
    def label(self):
        if self.kind == 'chain':
            return f'chain:{self.n}'
        if self.kind == 'gridworld':
            return f'gridworld:{self.width},{self.height},{self.slip:g}'
        return f'cliff:{self.width},{self.height},{self.fall_penalty:g}'

    def content_hash(self):
        """Stable digest of the spec used to tie batches to their environment."""
        payload = json.dumps(self.model_dump(), sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


class Transition(NamedTuple):
    s: int
    a: int
    r: float
    sp: int


@dataclass(frozen=True)
class Batch:
    """
    Logged transitions (s, a, r, s') stored column-wise, plus provenance
    metadata (environment hash, behavior policy, epsilon, seed, n).
    """
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.array(self.states, dtype=np.int64).reshape(-1)
        actions = np.array(self.actions, dtype=np.int64).reshape(-1)
        rewards = np.array(self.rewards, dtype=np.float64).reshape(-1)
        next_states = np.array(self.next_states, dtype=np.int64).reshape(-1)
        lengths = {len(states), len(actions), len(rewards), len(next_states)}
        if len(lengths) != 1:
            raise DimensionMismatchError(f"batch columns have different lengths {sorted(lengths)}")
        for name, column in (('states', states), ('actions', actions), ('rewards', rewards),
                             ('next_states', next_states)):
            column.setflags(write=False)
            object.__setattr__(self, name, column)
        object.__setattr__(self, 'meta', dict(self.meta))

    @classmethod
    def from_transitions(cls, transitions, meta=None):
        """Build a batch from an iterable of (s, a, r, s') tuples."""
        rows = [tuple(item) for item in transitions]
        columns = list(zip(*rows)) if rows else [(), (), (), ()]
        return cls(
            states=columns[0],
            actions=columns[1],
            rewards=columns[2],
            next_states=columns[3],
            meta=meta or {},
        )

    def __len__(self):
        return int(self.states.shape[0])

    def __iter__(self):
        for s, a, r, sp in zip(self.states.tolist(), self.actions.tolist(),
                               self.rewards.tolist(), self.next_states.tolist()):
            yield Transition(s, a, r, sp)

    @property
    def transitions(self):
        return list(self)

    def distinct_states(self):
        """Sorted distinct states observed in the batch."""
        return np.unique(self.states)

    def state_frequencies(self):
        """Map from distinct state to its number of occurrences."""
        states, counts = np.unique(self.states, return_counts=True)
        return dict(zip(states.tolist(), counts.tolist()))

    def check_dimensions(self, n_states, n_actions):
        """Raise DimensionMismatchError when an index falls outside the environment."""
        if not len(self):
            return
        for name, column, bound in (('state', self.states, n_states), ('action', self.actions, n_actions),
                                    ('next state', self.next_states, n_states)):
            if column.min() < 0 or column.max() >= bound:
                raise DimensionMismatchError(
                    f"batch {name} index {int(column.max())} outside [0, {bound})",
                    expected=bound,
                    actual=int(column.max()),
                )
