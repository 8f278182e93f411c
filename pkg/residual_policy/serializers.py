"""
JSON serialization of confidence tables and residual policies, mirroring the
MDP/policy document format.
"""

import json
from pathlib import Path
from typing import List

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from mdp_core.serializers import TabularPolicySerializer
from .models import ConfidenceTable, ResidualPolicy


class ConfidenceTableSerializer(BaseModel):
    """
    Schema for confidence documents {n_states, n_actions, lam: [[...]]}.
    """
    model_config = ConfigDict(extra='forbid')

    n_states: int
    n_actions: int
    lam: List[List[float]]

    @field_validator('lam')
    @classmethod
    def validate_lam(cls, value):
        """Validate that every confidence lies in [0, 1]."""
        if any(entry < 0.0 or entry > 1.0 for row in value for entry in row):
            raise ValueError("Confidence entries must lie in [0, 1].")
        return value

    @model_validator(mode='after')
    def validate_shape(self):
        """Validate that the table agrees with the declared counts."""
        if len(self.lam) != self.n_states or any(len(row) != self.n_actions for row in self.lam):
            raise ValueError(f"lam must be {self.n_states} x {self.n_actions}.")
        return self

    def to_confidence(self):
        return ConfidenceTable(self.lam)

    @classmethod
    def from_confidence(cls, lam):
        return cls(n_states=lam.n_states, n_actions=lam.n_actions, lam=lam.lam.tolist())


class ResidualPolicySerializer(BaseModel):
    """
    Schema bundling behavior, candidate, confidence and mixed policy.
    """
    behavior: TabularPolicySerializer
    candidate: TabularPolicySerializer
    confidence: ConfidenceTableSerializer
    mixed: TabularPolicySerializer

    @classmethod
    def from_residual(cls, residual):
        return cls(
            behavior=TabularPolicySerializer.from_policy(residual.behavior),
            candidate=TabularPolicySerializer.from_policy(residual.candidate),
            confidence=ConfidenceTableSerializer.from_confidence(residual.confidence),
            mixed=TabularPolicySerializer.from_policy(residual.mixed),
        )

    def to_residual(self):
        return ResidualPolicy(
            behavior=self.behavior.to_policy(),
            candidate=self.candidate.to_policy(),
            confidence=self.confidence.to_confidence(),
            mixed=self.mixed.to_policy(),
        )


def dump_confidence(lam, path):
    Path(path).write_text(json.dumps(ConfidenceTableSerializer.from_confidence(lam).model_dump(), sort_keys=True))


def load_confidence(path):
    return ConfidenceTableSerializer.model_validate_json(Path(path).read_text()).to_confidence()
