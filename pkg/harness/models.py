"""
Experiment configuration: one JSON document validated on load.
"""

from pathlib import Path
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from baselines.models import BASELINE_NAMES, BaselineConfig
from brpo_lab import settings
from brpo_solver.models import SolverConfig
from critic.models import CriticConfig
from datagen.models import EnvSpec

ALGORITHMS = ('brpo',) + BASELINE_NAMES


def algorithm_name(name):
    """Normalize CLI spellings such as 'brpo-c' to registry names."""
    return name.strip().lower().replace('-', '_')


class EvalConfig(BaseModel):
    """
    How trained policies are scored: exact linear solves or Monte-Carlo
    rollouts averaged over episodes.
    """
    model_config = ConfigDict(extra='forbid')

    mode: Literal['exact', 'rollout'] = 'exact'
    episodes: int = settings.EVAL_EPISODES
    interval: int = settings.EVAL_INTERVAL
    window: int = settings.EVAL_WINDOW

    @field_validator('episodes', 'interval', 'window')
    @classmethod
    def validate_positive(cls, value):
        """Validate that evaluation counts are positive."""
        if value <= 0:
            raise ValueError("Evaluation counts must be greater than 0.")
        return value


class ExperimentConfig(BaseModel):
    """
    Full experiment: environment, data regime, algorithm and evaluation.

    The BRPO learner reads its settings from "brpo" (including the critic
    mixing mu); the comparison algorithms read "baseline". "critic" selects
    the advantage source and the fixed-point tolerances.
    """
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    env: EnvSpec = Field(default_factory=lambda: EnvSpec(kind='chain'))
    epsilons: List[float] = Field(default_factory=lambda: list(settings.DEFAULT_EPSILONS))
    batch_size_transitions: int = settings.DEFAULT_BATCH_SIZE
    seeds: List[int] = Field(default_factory=lambda: list(settings.DEFAULT_SEEDS))
    quality: float = 0.75
    episode_cap: int = settings.EPISODE_CAP
    algo: str = 'brpo'
    algos: List[str] = Field(default_factory=lambda: ['brpo', 'bc', 'batch_q', 'spibb'])
    gamma: float = settings.DEFAULT_GAMMA
    brpo: SolverConfig = Field(default_factory=SolverConfig)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)
    critic: CriticConfig = Field(default_factory=CriticConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig, alias='eval')

    @field_validator('epsilons')
    @classmethod
    def validate_epsilons(cls, value):
        """Validate a nonempty list of exploration rates in [0, 1]."""
        if not value:
            raise ValueError("At least one epsilon is required.")
        if any(not 0.0 <= epsilon <= 1.0 for epsilon in value):
            raise ValueError("Every epsilon must lie in [0, 1].")
        return value

    @field_validator('seeds')
    @classmethod
    def validate_seeds(cls, value):
        """Validate that at least one seed is given."""
        if not value:
            raise ValueError("At least one seed is required.")
        return value

    @field_validator('batch_size_transitions')
    @classmethod
    def validate_batch_size(cls, value):
        if value < 0:
            raise ValueError("batch_size_transitions must be 0 or greater.")
        return value

    @field_validator('episode_cap')
    @classmethod
    def validate_episode_cap(cls, value):
        if value <= 0:
            raise ValueError("episode_cap must be greater than 0.")
        return value

    @field_validator('quality')
    @classmethod
    def validate_quality(cls, value):
        """Validate a behavior quality in (0, 1]."""
        if not 0.0 < value <= 1.0:
            raise ValueError("quality must lie in (0, 1].")
        return value

    @field_validator('gamma')
    @classmethod
    def validate_gamma(cls, value):
        if not 0.0 <= value < 1.0:
            raise ValueError("gamma must lie in [0, 1).")
        return value

    @field_validator('algo')
    @classmethod
    def validate_algo(cls, value):
        """Validate the algorithm against the registry."""
        name = algorithm_name(value)
        if name not in ALGORITHMS:
            raise ValueError(f"algo must be one of {', '.join(ALGORITHMS)}.")
        return name

    @field_validator('algos')
    @classmethod
    def validate_algos(cls, value):
        names = [algorithm_name(item) for item in value]
        unknown = sorted(set(names) - set(ALGORITHMS))
        if unknown or not names:
            raise ValueError(f"algos must be a nonempty subset of {', '.join(ALGORITHMS)}.")
        return names

    @model_validator(mode='after')
    def validate_env_gamma(self):
        """The experiment discount applies to the environment."""
        if self.env.gamma != self.gamma:
            self.env = self.env.model_copy(update={'gamma': self.gamma})
        return self

    def critic_for_brpo(self):
        """Critic settings of the BRPO learner, with mu taken from the solver config."""
        return self.critic.model_copy(update={'mu': self.brpo.mu})


def load_config(path=None):
    """Read an experiment config; None gives the defaults."""
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.model_validate_json(Path(path).read_text())
