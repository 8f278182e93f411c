"""
Critic configuration.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, field_validator


class CriticConfig(BaseModel):
    """
    Settings of the advantage estimator.

    source selects the model the fixed point is solved on: the true MDP
    (verification runs) or the maximum-likelihood model of the batch.
    """
    model_config = ConfigDict(extra='forbid')

    mu: float = 0.9
    sweeps: int = 100000
    tol: float = 1e-10
    source: Literal['exact_model', 'empirical_model'] = 'empirical_model'

    @field_validator('mu')
    @classmethod
    def validate_mu(cls, value):
        """Validate that the mixing weight lies in [0, 1]."""
        if not 0.0 <= value <= 1.0:
            raise ValueError("mu must lie in [0, 1].")
        return value

    @field_validator('sweeps')
    @classmethod
    def validate_sweeps(cls, value):
        """Validate that at least one sweep is allowed."""
        if value < 1:
            raise ValueError("sweeps must be at least 1.")
        return value

    @field_validator('tol')
    @classmethod
    def validate_tol(cls, value):
        if value <= 0.0:
            raise ValueError("tol must be greater than 0.")
        return value
