"""
JSON serialization of MDPs and policies.

MDP documents look like
{n_states, n_actions, gamma, r_max, reward: [[...]], transition: [[[...]]], start: [...]}
with row-major nested lists of 64-bit floats; policy documents mirror them as
{n_states, n_actions, probs: [[...]]}.
"""

import json
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from brpo_lab.exceptions import DimensionMismatchError
from .models import FiniteMdp, TabularPolicy


class FiniteMdpSerializer(BaseModel):
    """
    Schema for MDP documents.
    """
    model_config = ConfigDict(extra='forbid')

    n_states: int
    n_actions: int
    gamma: float
    r_max: float = 1.0
    reward: List[List[float]]
    transition: List[List[List[float]]]
    start: List[float]
    coordinates: Optional[List[List[float]]] = None
    name: str = ''

    @field_validator('n_states', 'n_actions')
    @classmethod
    def validate_count(cls, value):
        """Validate that counts are positive."""
        if value <= 0:
            raise ValueError("Counts must be greater than 0.")
        return value

    @field_validator('gamma')
    @classmethod
    def validate_gamma(cls, value):
        """Validate that the discount lies in [0, 1)."""
        if not 0.0 <= value < 1.0:
            raise ValueError("gamma must lie in [0, 1).")
        return value

    @model_validator(mode='after')
    def validate_shapes(self):
        """Validate that nested lists agree with the declared counts."""
        n_states, n_actions = self.n_states, self.n_actions
        if len(self.reward) != n_states or any(len(row) != n_actions for row in self.reward):
            raise ValueError(f"reward must be {n_states} x {n_actions}.")
        if len(self.transition) != n_states or any(
            len(row) != n_actions or any(len(cell) != n_states for cell in row) for row in self.transition
        ):
            raise ValueError(f"transition must be {n_states} x {n_actions} x {n_states}.")
        if len(self.start) != n_states:
            raise ValueError(f"start must have {n_states} entries.")
        return self

    def to_mdp(self):
        return FiniteMdp(
            reward=self.reward,
            transition=self.transition,
            start=self.start,
            gamma=self.gamma,
            r_max=self.r_max,
            coordinates=self.coordinates,
            name=self.name,
        )

    @classmethod
    def from_mdp(cls, mdp):
        return cls(
            n_states=mdp.n_states,
            n_actions=mdp.n_actions,
            gamma=mdp.gamma,
            r_max=mdp.r_max,
            reward=mdp.reward.tolist(),
            transition=mdp.transition.tolist(),
            start=mdp.start.tolist(),
            coordinates=None if mdp.coordinates is None else mdp.coordinates.tolist(),
            name=mdp.name,
        )


class TabularPolicySerializer(BaseModel):
    """
    Schema for policy documents.
    """
    model_config = ConfigDict(extra='forbid')

    n_states: int
    n_actions: int
    probs: List[List[float]]

    @model_validator(mode='after')
    def validate_shape(self):
        """Validate that the table agrees with the declared counts."""
        if len(self.probs) != self.n_states or any(len(row) != self.n_actions for row in self.probs):
            raise ValueError(f"probs must be {self.n_states} x {self.n_actions}.")
        return self

    def to_policy(self):
        return TabularPolicy(self.probs)

    @classmethod
    def from_policy(cls, pi):
        return cls(n_states=pi.n_states, n_actions=pi.n_actions, probs=pi.probs.tolist())


def dump_mdp(mdp, path):
    Path(path).write_text(FiniteMdpSerializer.from_mdp(mdp).model_dump_json(exclude_none=True))


def load_mdp(path):
    return FiniteMdpSerializer.model_validate_json(Path(path).read_text()).to_mdp()


def dump_policy(pi, path, extra=None):
    """Write a policy document; extra keys (e.g. provenance) are stored next to it."""
    document = TabularPolicySerializer.from_policy(pi).model_dump()
    if extra:
        document = {**document, 'meta': extra}
    Path(path).write_text(json.dumps(document, sort_keys=True))


def load_policy(path, mdp=None, with_meta=False):
    """
    Read a policy document, checking its shape against mdp when given.
    with_meta returns (policy, meta) with the stored provenance ({} if none).
    """
    document = json.loads(Path(path).read_text())
    meta = document.pop('meta', {})
    pi = TabularPolicySerializer.model_validate(document).to_policy()
    if mdp is not None and (pi.n_states, pi.n_actions) != (mdp.n_states, mdp.n_actions):
        raise DimensionMismatchError(
            f"policy {pi.probs.shape} does not match environment {(mdp.n_states, mdp.n_actions)}",
            expected=(mdp.n_states, mdp.n_actions),
            actual=pi.probs.shape,
        )
    return (pi, meta) if with_meta else pi
