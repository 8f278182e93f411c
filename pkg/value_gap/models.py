"""
Value-gap result types: residual rewards, bound fragments and the full
certification report.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

CERTIFICATION_TOL = 1e-9


@dataclass(frozen=True)
class ResidualReward:
    """
    Residual rewards of a feasible (beta, rho, lambda) triple.

    delta_a holds sum_a lambda (rho - beta) adv for the advantage the
    rewards were built from (A_beta in 'behavior' mode, A_pi in 'target'
    mode). delta_t and delta_r are the kernel and reward differences
    T_pi - T_beta and R_pi - R_beta.
    """
    delta_a: np.ndarray
    delta_t: np.ndarray
    delta_r: np.ndarray
    mode: str


@dataclass
class Certification:
    """A single bound check: exact_gap >= rhs - tol."""
    name: str
    rhs: float
    exact_gap: float
    tol: float = CERTIFICATION_TOL

    @property
    def slack(self):
        return self.exact_gap - self.rhs

    @property
    def passed(self):
        return self.slack >= -self.tol

    def as_row(self):
        return {
            'bound_name': self.name,
            'rhs': self.rhs,
            'exact_gap': self.exact_gap,
            'slack': self.slack,
            'pass': self.passed,
        }


@dataclass
class VanillaBound:
    surrogate: float
    epsilon: float
    kl_term: float
    rhs: float


@dataclass
class ResidualBound:
    l_prime: float
    l_double_prime: float
    l_triple_prime: List[float]
    max_l_triple_prime: float
    rhs: float


@dataclass
class LagrangianTerms:
    expected_l_triple_prime: float
    objective: float


@dataclass
class PinskerTerms:
    kappa_lambda: List[float]
    kappa_abs_adv_lambda: List[float]
    l_double_prime_tilde: float
    l_triple_prime_tilde: float
    l_double_prime: float
    expected_l_triple_prime: float

    @property
    def double_prime_direction(self):
        """'<=' when the relaxed term stays below the exact one."""
        return '<=' if self.l_double_prime_tilde <= self.l_double_prime else '>'

    @property
    def triple_prime_direction(self):
        return '<=' if self.l_triple_prime_tilde <= self.expected_l_triple_prime else '>'


@dataclass
class WeightedBound:
    mu: float
    l_prime_mu: float
    rhs: float


@dataclass
class BoundReport:
    """All bound terms of one instance plus the exact gap they are certified against."""
    exact_gap: float
    vanilla: List[VanillaBound] = field(default_factory=list)
    residual: Optional[ResidualBound] = None
    lagrangian: Optional[LagrangianTerms] = None
    pinsker: Optional[PinskerTerms] = None
    weighted: List[WeightedBound] = field(default_factory=list)
    certifications: List[Certification] = field(default_factory=list)

    @property
    def passed(self):
        return all(item.passed for item in self.certifications)

    def as_dict(self) -> Dict:
        document = asdict(self)
        document['certifications'] = [item.as_row() for item in self.certifications]
        document['passed'] = self.passed
        if self.pinsker is not None:
            document['pinsker']['double_prime_direction'] = self.pinsker.double_prime_direction
            document['pinsker']['triple_prime_direction'] = self.pinsker.triple_prime_direction
        return document
