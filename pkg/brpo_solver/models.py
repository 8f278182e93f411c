"""
BRPO learner types: solver configuration, the confidence quadratic program,
per-state confidence labels and the coordinate-ascent trace.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.linalg import eigvalsh

from brpo_lab.exceptions import EmptyBatchError

QP_METHODS = ('closed_form_clip', 'projected_gradient', 'active_set', 'brute_force')


class SolverConfig(BaseModel):
    """
    Settings of one BRPO run, stored under "brpo" in the experiment config.
    """
    model_config = ConfigDict(extra='forbid')

    iterations: int = 20
    mu: float = 0.9
    kappa_max: Optional[float] = None
    decay_eps: Optional[float] = None
    qp_method: Literal['closed_form_clip', 'projected_gradient', 'active_set', 'brute_force'] = 'active_set'
    qp_tol: float = 1e-9
    qp_ridge: float = 1e-6
    qp_max_iterations: int = 500
    pg_max_iterations: int = 20000
    mm_max_iterations: int = 100
    global_scan: int = 17
    on_indefinite: Literal['majorize', 'error'] = 'majorize'
    brute_force_budget: int = 200000
    brute_force_refine: float = 1e-5
    init_lambda: float = 1.0
    generalize: bool = False
    nn_metric: Literal['manhattan', 'euclidean', 'hamming'] = 'manhattan'
    seed: int = 0

    @field_validator('iterations', 'qp_max_iterations', 'pg_max_iterations', 'mm_max_iterations',
                     'brute_force_budget')
    @classmethod
    def validate_nonnegative_count(cls, value):
        """Validate that iteration counts are not negative."""
        if value < 0:
            raise ValueError("Counts must be 0 or greater.")
        return value

    @field_validator('mu', 'init_lambda')
    @classmethod
    def validate_unit_interval(cls, value):
        """Validate mixing weights in [0, 1]."""
        if not 0.0 <= value <= 1.0:
            raise ValueError("Value must lie in [0, 1].")
        return value

    @field_validator('kappa_max')
    @classmethod
    def validate_kappa_max(cls, value):
        """Validate that the temperature cap is positive."""
        if value is not None and value <= 0.0:
            raise ValueError("kappa_max must be greater than 0.")
        return value

    @field_validator('decay_eps')
    @classmethod
    def validate_decay(cls, value):
        """Validate a decay factor in (0, 1); a zero factor would zero the temperature."""
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError("decay_eps must lie in (0, 1).")
        return value

    @field_validator('qp_tol', 'brute_force_refine')
    @classmethod
    def validate_tolerance(cls, value):
        if value <= 0.0:
            raise ValueError("Tolerances must be greater than 0.")
        return value

    @field_validator('qp_ridge')
    @classmethod
    def validate_ridge(cls, value):
        if value < 0.0:
            raise ValueError("qp_ridge must be 0 or greater.")
        return value


@dataclass(frozen=True)
class SaaTerms:
    """Sample-average L', L'', L''' and the objective built from them."""
    l_prime: float
    l_double_prime: float
    l_triple_prime: float
    objective: float


@dataclass
class ConfidenceQp:
    """
    Concave-quadratic confidence program over every action of each distinct
    batch state:

        maximize  lam . linear - 1/2 lam^T theta lam
        s.t.      equality @ lam = 0,  0 <= lam <= 1

    with theta = scale (h d^T + d h^T), d = q |rho - beta|, h = |A_beta| d
    and q the frequency weight of each state (1 for a batch without repeats).
    """
    states: np.ndarray
    n_actions: int
    n_samples: int
    gamma: float
    weights: np.ndarray
    diff: np.ndarray
    abs_adv: np.ndarray
    linear: np.ndarray
    d: np.ndarray
    h: np.ndarray
    scale: float
    theta: np.ndarray
    equality: np.ndarray

    @property
    def n_states(self):
        return int(self.states.shape[0])

    @property
    def dimension(self):
        return int(self.linear.shape[0])

    @property
    def pairs(self):
        """(s, a) pair of every coordinate, state-major."""
        return [(int(s), a) for s in self.states for a in range(self.n_actions)]

    @cached_property
    def min_eigenvalue(self):
        return float(eigvalsh(self.theta).min()) if self.dimension else 0.0

    def is_concave(self, tol=1e-9):
        return self.min_eigenvalue >= -tol

    @property
    def degenerate(self):
        """True when every feasible point scores zero."""
        return not np.any(self.linear) and not (np.any(self.d) and np.any(self.h))

    @property
    def active(self):
        """Coordinates whose candidate and behavior probabilities differ."""
        return self.diff.reshape(-1) != 0.0

    def objective(self, lam_bar):
        lam_bar = np.asarray(lam_bar, dtype=np.float64)
        return float(lam_bar @ self.linear - self.scale * (self.h @ lam_bar) * (self.d @ lam_bar))

    def constraint_residual(self, lam_bar):
        """Largest equality or box violation."""
        lam_bar = np.asarray(lam_bar, dtype=np.float64)
        equality = np.abs(self.equality @ lam_bar).max() if self.n_states else 0.0
        box = max(0.0, -lam_bar.min(), lam_bar.max() - 1.0) if lam_bar.size else 0.0
        return float(max(equality, box))

    def rows(self, lam_bar):
        """Reshape a coordinate vector into one row per batch state."""
        return np.asarray(lam_bar, dtype=np.float64).reshape(self.n_states, self.n_actions)


@dataclass
class ConfidenceLabelSet:
    """
    Solved confidence rows of the batch states, with the coordinates used to
    find the nearest labelled state of an arbitrary query.
    """
    states: np.ndarray
    labels: np.ndarray
    coordinates: Optional[np.ndarray] = None
    metric: str = 'manhattan'

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        self.labels = np.clip(np.asarray(self.labels, dtype=np.float64), 0.0, 1.0)
        if self.states.shape[0] == 0:
            raise EmptyBatchError("confidence label set is empty")

    def __len__(self):
        return int(self.states.shape[0])

    def distances(self, query_state):
        """Distance from query_state to every labelled state."""
        if self.metric != 'hamming' and self.coordinates is not None:
            offsets = self.coordinates[self.states] - self.coordinates[int(query_state)]
            if self.metric == 'euclidean':
                return np.sqrt((offsets ** 2).sum(axis=1))
            return np.abs(offsets).sum(axis=1)
        # Bitwise Hamming distance between raw indices.
        return np.array([bin(int(state) ^ int(query_state)).count('1') for state in self.states], dtype=np.float64)

    def nearest(self, query_state):
        """Index of the closest labelled state; ties go to the lowest state index."""
        return int(np.argmin(self.distances(query_state)))


@dataclass
class TraceRow:
    iter: int
    half_step: str
    L_bar: float
    Lp: float
    Lpp: float
    Lppp: float
    J_exact: Optional[float] = None

    def as_row(self):
        return {
            'iter': self.iter,
            'half_step': self.half_step,
            'L_bar': self.L_bar,
            'Lp': self.Lp,
            'Lpp': self.Lpp,
            'Lppp': self.Lppp,
            'J_exact': '' if self.J_exact is None else self.J_exact,
        }


@dataclass
class CoordinateAscentTrace:
    """Per-half-step record of the SAA objective."""
    rows: List[TraceRow] = field(default_factory=list)

    def append(self, iteration, half_step, terms, j_exact=None):
        self.rows.append(TraceRow(
            iter=iteration,
            half_step=half_step,
            L_bar=terms.objective,
            Lp=terms.l_prime,
            Lpp=terms.l_double_prime,
            Lppp=terms.l_triple_prime,
            J_exact=j_exact,
        ))

    def lambda_steps(self):
        """(objective before, objective after) of every lambda-step."""
        steps = []
        previous = None
        for row in self.rows:
            if row.half_step == 'rho':
                previous = row.L_bar
            elif row.half_step == 'lambda' and previous is not None:
                steps.append((previous, row.L_bar))
        return steps

    def as_rows(self):
        return [row.as_row() for row in self.rows]


@dataclass(frozen=True)
class SolverResult:
    """Outcome of coordinate ascent: candidate, confidence, mixture and trace."""
    candidate: object
    confidence: object
    residual: object
    trace: CoordinateAscentTrace
