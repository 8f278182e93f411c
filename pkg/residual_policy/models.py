"""
Residual-policy value types: confidence tables and materialized mixtures
pi = (1 - lambda) beta + lambda rho.
"""

from dataclasses import dataclass

import numpy as np

from brpo_lab import settings
from brpo_lab.exceptions import InvalidModelError
from mdp_core.models import TabularPolicy


@dataclass(frozen=True)
class ConfidenceTable:
    """Confidence lambda(s, a) in [0, 1] for every state-action pair."""
    lam: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64)
        if lam.ndim != 2:
            raise InvalidModelError(f"confidence must be a 2-d table, got shape {lam.shape}")
        tol = settings.PROBABILITY_TOL
        if lam.size and (lam.min() < -tol or lam.max() > 1.0 + tol or not np.all(np.isfinite(lam))):
            raise InvalidModelError(f"confidence entries must lie in [0, 1], got [{lam.min()}, {lam.max()}]")
        lam = np.clip(lam, 0.0, 1.0)
        lam.setflags(write=False)
        object.__setattr__(self, 'lam', lam)

    @classmethod
    def constant(cls, n_states, n_actions, value):
        """State-constant confidence, feasible for every (beta, rho)."""
        return cls(np.full((n_states, n_actions), float(value)))

    @classmethod
    def zeros(cls, n_states, n_actions):
        return cls.constant(n_states, n_actions, 0.0)

    @property
    def n_states(self):
        return self.lam.shape[0]

    @property
    def n_actions(self):
        return self.lam.shape[1]


@dataclass(frozen=True)
class ConfidenceReport:
    """Outcome of checking a confidence table against (beta, rho)."""
    residuals: np.ndarray
    box_violation: float
    tol: float

    @property
    def max_residual(self):
        return float(np.abs(self.residuals).max()) if self.residuals.size else 0.0

    @property
    def violating_states(self):
        return [int(s) for s in np.flatnonzero(np.abs(self.residuals) > self.tol)]

    @property
    def passed(self):
        return self.max_residual <= self.tol and self.box_violation <= self.tol

    def as_dict(self):
        return {
            'max_residual': self.max_residual,
            'box_violation': self.box_violation,
            'violating_states': self.violating_states,
            'passed': self.passed,
        }


@dataclass(frozen=True)
class ResidualPolicy:
    """
    Behavior beta, candidate rho, confidence lambda and the materialized
    mixture pi(a|s) = (1 - lambda(s, a)) beta(a|s) + lambda(s, a) rho(a|s).
    """
    behavior: TabularPolicy
    candidate: TabularPolicy
    confidence: ConfidenceTable
    mixed: TabularPolicy
