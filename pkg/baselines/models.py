"""
Baseline configuration.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from critic.models import CriticConfig

BASELINE_NAMES = ('bc', 'batch_q', 'kl_q', 'spibb', 'brpo_c')


class BaselineConfig(BaseModel):
    """
    Settings of one comparison algorithm. Only the parameters of the
    selected algo are read; all carry defaults.
    """
    model_config = ConfigDict(extra='forbid')

    algo: Literal['bc', 'batch_q', 'kl_q', 'spibb', 'brpo_c'] = 'bc'
    kl_weight: float = 0.1
    spibb_threshold: float = 0.2
    spibb_mode: Literal['fraction', 'count'] = 'fraction'
    const_lambda: float = 0.5
    critic: CriticConfig = Field(default_factory=CriticConfig)

    @field_validator('kl_weight')
    @classmethod
    def validate_kl_weight(cls, value):
        """Validate that the KL weight is positive; a zero weight has no soft backup."""
        if value <= 0.0:
            raise ValueError("kl_weight must be greater than 0.")
        return value

    @field_validator('spibb_threshold')
    @classmethod
    def validate_threshold(cls, value):
        if value < 0.0:
            raise ValueError("spibb_threshold must be 0 or greater.")
        return value

    @field_validator('const_lambda')
    @classmethod
    def validate_const_lambda(cls, value):
        """Validate that the constant confidence lies in [0, 1]."""
        if not 0.0 <= value <= 1.0:
            raise ValueError("const_lambda must lie in [0, 1].")
        return value

    @model_validator(mode='after')
    def validate_fraction(self):
        """A fractional threshold is a share of the largest visit count."""
        if self.spibb_mode == 'fraction' and self.spibb_threshold > 1.0:
            raise ValueError("a fractional spibb_threshold must not exceed 1.")
        return self
